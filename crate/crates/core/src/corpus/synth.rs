//! Seeded synthetic report corpora.
//!
//! Each document is rendered from a ground-truth [`ExtractionRecord`] as a
//! list of text blocks (header, footprint line, one block per table row,
//! boilerplate paragraphs) and then degraded with three kinds of extraction
//! noise: block shuffling, spurious hidden tokens between blocks, and table
//! rows split across paragraphs. Noise never touches the inside of a
//! value-bearing line, so every field pattern still matches exactly once.

use std::collections::HashSet;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::profile::{COMPONENTS, ComponentInfo, LIFECYCLE_STAGES};
use super::{CompanyProfile, Document, ExtractionRecord};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub documents: usize,
    /// Fraction of documents using the lifecycle-breakdown layout.
    pub lifecycle_share: f64,
    /// Probability that a document's blocks are permuted.
    pub block_shuffle_prob: f64,
    /// Probability of a spurious token line at each block boundary.
    pub spurious_token_rate: f64,
    /// Probability that a table row is split into label and value paragraphs.
    pub paragraph_split_rate: f64,
    pub min_components: usize,
    pub max_components: usize,
    /// Boilerplate sentences per document, inclusive range.
    pub filler_sentences: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            documents: 200,
            lifecycle_share: 0.5,
            block_shuffle_prob: 0.3,
            spurious_token_rate: 0.15,
            paragraph_split_rate: 0.2,
            min_components: 4,
            max_components: 8,
            filler_sentences: (26, 36),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("synthetic corpus needs at least one document")]
    NoDocuments,
    #[error("`{name}` must be a probability in [0, 1], got {value}")]
    BadProbability { name: &'static str, value: f64 },
    #[error("component count range {min}..={max} must lie within 1..={catalog}")]
    BadComponentRange {
        min: usize,
        max: usize,
        catalog: usize,
    },
    #[error("filler sentence range {0}..={1} is empty")]
    BadFillerRange(usize, usize),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.documents == 0 {
            return Err(SynthError::NoDocuments);
        }
        for (name, value) in [
            ("lifecycle_share", self.lifecycle_share),
            ("block_shuffle_prob", self.block_shuffle_prob),
            ("spurious_token_rate", self.spurious_token_rate),
            ("paragraph_split_rate", self.paragraph_split_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::BadProbability { name, value });
            }
        }
        if self.min_components == 0
            || self.min_components > self.max_components
            || self.max_components > COMPONENTS.len()
        {
            return Err(SynthError::BadComponentRange {
                min: self.min_components,
                max: self.max_components,
                catalog: COMPONENTS.len(),
            });
        }
        if self.filler_sentences.0 > self.filler_sentences.1 {
            return Err(SynthError::BadFillerRange(
                self.filler_sentences.0,
                self.filler_sentences.1,
            ));
        }
        Ok(())
    }
}

const SERIES: [&str; 12] = [
    "Zentra", "Orbis", "Veltro", "Kestrel", "Nimbus", "Solace", "Arcadia", "Tessel", "Quanta",
    "Lumen", "Strata", "Corvid",
];

const PRODUCT_TYPES: [&str; 5] = ["laptop", "desktop", "workstation", "notebook", "tablet"];

/// Shared opening paragraph. It contains every function word used by the
/// question templates so that no document is favoured by template wording.
pub(crate) const INTRO: &str = "This report explains what the estimated carbon footprints of the product are over its whole life cycle, expressed in kgCO2e. \
It states the total carbon footprint and the percentage share that each stage of the life cycle and each of the components account for, \
and how much is attributed to manufacturing. Readers can calculate how much carbon individual components do contribute, \
which component has the largest or the smallest footprint, which contributes the most or the least, \
and which components have the top contributions ranked by footprint. Other stages are reported for completeness in this product.";

const FILLER: [&str; 24] = [
    "The assessment follows a streamlined life cycle approach based on industry averages.",
    "Results are estimates and depend on assumptions about typical customer behaviour.",
    "Material composition data was collected from suppliers and internal engineering records.",
    "The functional unit covers the product as shipped including standard accessories.",
    "Energy consumption during operation is modelled with a regional electricity mix.",
    "Transport assumptions include sea freight and road transport to the final market.",
    "Uncertainty ranges reflect variation in supplier data and modelling choices.",
    "Values in the tables are rounded and may therefore not add up exactly.",
    "The manufacturing phase includes extraction of raw materials and assembly.",
    "Recycling credits are not included in the reported figures.",
    "Integrated circuits typically dominate the footprint of electronic assemblies.",
    "Product design teams use these results to prioritise reduction opportunities.",
    "The methodology is aligned with widely used product carbon footprint standards.",
    "Packaging materials are sourced with a preference for recycled fibres.",
    "Customers can reduce impacts by extending the useful life of the device.",
    "Secondary data sets were used where primary measurements were not available.",
    "The estimate excludes accessories that are sold separately from the product.",
    "Regional differences in grid intensity can change the operational impact considerably.",
    "Results should not be compared directly with products assessed by other methods.",
    "Logistics emissions cover movement from final assembly to the distribution centre.",
    "Storage devices and printed circuit boards contain energy intensive materials.",
    "Display technology choices influence both manufacturing and operational emissions.",
    "The report was reviewed internally for consistency with previous assessments.",
    "Further information about environmental programmes is published on request.",
];

const SPURIOUS: [&str; 14] = [
    "0.3", "12", "kg", "*", "n/a", "Rev. 2", "1/2", "©", "TBD", "0", "%", "23.1", "ISO", "p. 1",
];

const CHARS_PER_PAGE: usize = 2200;

#[derive(Debug, Clone)]
enum Block {
    Plain(String),
    /// A labelled table row; `key` is the stage or component name.
    Row {
        key: String,
        is_stage: bool,
        label: String,
        value: String,
        colon: bool,
    },
}

/// Generates `config.documents` reports and their ground-truth records.
pub fn synthesize_corpus(
    config: &SynthConfig,
    seed: u64,
) -> Result<(Vec<Document>, Vec<ExtractionRecord>), SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth"));
    let mut used_names = HashSet::new();
    let width = config.documents.to_string().len().max(4);

    let mut docs = Vec::with_capacity(config.documents);
    let mut records = Vec::with_capacity(config.documents);
    for i in 0..config.documents {
        let doc_id = format!("doc{i:0width$}");
        let profile = if rng.gen_bool(config.lifecycle_share) {
            CompanyProfile::Hp
        } else {
            CompanyProfile::Direct
        };
        let product_name = loop {
            let name = random_product_name(&mut rng);
            if used_names.insert(name.clone()) {
                break name;
            }
        };
        let (doc, record) = synthesize_document(config, &mut rng, doc_id, profile, product_name);
        docs.push(doc);
        records.push(record);
    }
    Ok((docs, records))
}

fn random_product_name(rng: &mut ChaCha8Rng) -> String {
    let series = SERIES[rng.gen_range(0..SERIES.len())];
    let prefix = (b'A' + rng.gen_range(0..26u8)) as char;
    let digits = rng.gen_range(1000..10000u32);
    let suffix = (b'A' + rng.gen_range(0..26u8)) as char;
    format!("{series} {prefix}{digits}{suffix}")
}

/// Formats an amount held in tenths as `24` or `24.5`.
fn tenths_text(tenths: u32) -> String {
    if tenths.is_multiple_of(10) {
        (tenths / 10).to_string()
    } else {
        format!("{}.{}", tenths / 10, tenths % 10)
    }
}

fn tenths_value(tenths: u32) -> f64 {
    tenths as f64 / 10.0
}

/// Splits 1000 tenths across `weights` by largest remainder with a floor of
/// `min` tenths per share.
fn allocate_tenths(weights: &[f64], min: u32) -> Vec<u32> {
    let spare = 1000 - min * weights.len() as u32;
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * spare as f64).collect();
    let mut shares: Vec<u32> = exact.iter().map(|e| e.floor() as u32).collect();
    let mut remaining = spare - shares.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &idx in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        shares[idx] += 1;
        remaining -= 1;
    }
    shares.iter().map(|s| s + min).collect()
}

fn synthesize_document(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    doc_id: String,
    profile: CompanyProfile,
    product_name: String,
) -> (Document, ExtractionRecord) {
    let product_type = PRODUCT_TYPES[rng.gen_range(0..PRODUCT_TYPES.len())].to_string();
    let total_tenths = rng.gen_range(800..15000u32);

    let count = rng.gen_range(config.min_components..=config.max_components);
    let mut catalog: Vec<&ComponentInfo> = COMPONENTS.iter().collect();
    catalog.shuffle(rng);
    let chosen: Vec<&ComponentInfo> = catalog.into_iter().take(count).collect();
    let weights: Vec<f64> = chosen.iter().map(|_| rng.gen_range(1.0..10.0)).collect();
    let mut shares = allocate_tenths(&weights, 5);
    // reported tables often drift from 100% by rounding
    if rng.gen_bool(0.3) {
        let idx = rng.gen_range(0..shares.len());
        let drift: i32 = rng.gen_range(-10..=10);
        shares[idx] = (shares[idx] as i32 + drift).max(5) as u32;
        let sum: u32 = shares.iter().sum();
        if !(990..=1010).contains(&sum) {
            shares[idx] = (shares[idx] as i32 - drift) as u32;
        }
    }

    let stage_shares = match profile {
        CompanyProfile::Hp => {
            let manufacturing = rng.gen_range(400..=850u32);
            let distribution = rng.gen_range(10..=100u32);
            let end_of_life = rng.gen_range(1..=15u32);
            let use_phase = 1000 - manufacturing - distribution - end_of_life;
            Some([manufacturing, distribution, use_phase, end_of_life])
        }
        CompanyProfile::Direct => None,
    };

    let mut blocks = Vec::new();
    match profile {
        CompanyProfile::Hp => {
            blocks.push(Block::Plain(format!(
                "Product Carbon Footprint Report\n{product_name}"
            )));
            blocks.push(Block::Plain(format!(
                "Product name: {product_name}\nProduct type: {product_type}"
            )));
        }
        CompanyProfile::Direct => {
            blocks.push(Block::Plain(format!(
                "Product Environmental Profile\n{product_name}"
            )));
            blocks.push(Block::Plain(format!(
                "Model: {product_name}\nCategory: {product_type}"
            )));
        }
    }
    blocks.push(Block::Plain(INTRO.to_string()));
    blocks.push(Block::Plain(format!(
        "Screen size: {} in\nProduct weight: {}.{} kg\nYear of introduction: {}",
        rng.gen_range(11..=34),
        rng.gen_range(1..=9),
        rng.gen_range(0..=9),
        rng.gen_range(2018..=2025)
    )));
    let sd = tenths_text(total_tenths / rng.gen_range(4..=9));
    match profile {
        CompanyProfile::Hp => blocks.push(Block::Plain(format!(
            "Product Carbon Footprint (PCF) {} kgCO2e\nStandard deviation {sd} kgCO2e",
            tenths_text(total_tenths)
        ))),
        CompanyProfile::Direct => blocks.push(Block::Plain(format!(
            "Total carbon footprint: {} kg CO2e\nUncertainty range {sd} kg CO2e",
            tenths_text(total_tenths)
        ))),
    }
    if let Some(stage_shares) = stage_shares {
        blocks.push(Block::Plain("Estimated impact by lifecycle stage".into()));
        for (stage, tenths) in LIFECYCLE_STAGES.iter().zip(stage_shares) {
            blocks.push(Block::Row {
                key: stage.name.into(),
                is_stage: true,
                label: stage.label.into(),
                value: tenths_text(tenths),
                colon: false,
            });
        }
        blocks.push(Block::Plain(
            "Manufacturing carbon footprint breakdown".into(),
        ));
    } else {
        blocks.push(Block::Plain(
            "Carbon footprint by component (share of total)".into(),
        ));
    }
    for (component, &tenths) in chosen.iter().zip(&shares) {
        let (label, colon) = match profile {
            CompanyProfile::Hp => (component.hp_label, false),
            CompanyProfile::Direct => (component.direct_label, true),
        };
        blocks.push(Block::Row {
            key: component.name.into(),
            is_stage: false,
            label: label.into(),
            value: tenths_text(tenths),
            colon,
        });
    }
    let sentences = rng.gen_range(config.filler_sentences.0..=config.filler_sentences.1);
    let mut paragraph = Vec::new();
    for _ in 0..sentences {
        paragraph.push(FILLER[rng.gen_range(0..FILLER.len())]);
        if paragraph.len() == 6 {
            blocks.push(Block::Plain(paragraph.join(" ")));
            paragraph.clear();
        }
    }
    if !paragraph.is_empty() {
        blocks.push(Block::Plain(paragraph.join(" ")));
    }

    if rng.gen_bool(config.block_shuffle_prob) {
        blocks.shuffle(rng);
    }

    let mut rendered = Vec::with_capacity(blocks.len() * 2);
    let mut stage_order = Vec::new();
    let mut component_order = Vec::new();
    for (i, block) in blocks.iter().enumerate() {
        if i > 0 && rng.gen_bool(config.spurious_token_rate) {
            rendered.push(SPURIOUS[rng.gen_range(0..SPURIOUS.len())].to_string());
        }
        match block {
            Block::Plain(text) => rendered.push(text.clone()),
            Block::Row {
                key,
                is_stage,
                label,
                value,
                colon,
            } => {
                let sep = if *colon { ":" } else { "" };
                if rng.gen_bool(config.paragraph_split_rate) {
                    rendered.push(format!("{label}{sep}\n\n{value}%"));
                } else {
                    rendered.push(format!("{label}{sep} {value}%"));
                }
                if *is_stage {
                    stage_order.push(key.clone());
                } else {
                    component_order.push(key.clone());
                }
            }
        }
    }
    let raw_text = rendered.join("\n");
    let pages = raw_text.chars().count().div_ceil(CHARS_PER_PAGE) as u32;

    let component_values: IndexMap<&str, f64> = chosen
        .iter()
        .zip(&shares)
        .map(|(c, &t)| (c.name, tenths_value(t)))
        .collect();
    let component_percents = component_order
        .iter()
        .map(|name| (name.clone(), component_values[name.as_str()]))
        .collect();
    let lifecycle_percents = stage_shares.map(|stage_shares| {
        let values: IndexMap<&str, f64> = LIFECYCLE_STAGES
            .iter()
            .zip(stage_shares)
            .map(|(s, t)| (s.name, tenths_value(t)))
            .collect();
        stage_order
            .iter()
            .map(|name| (name.clone(), values[name.as_str()]))
            .collect()
    });

    let record = ExtractionRecord {
        doc_id: doc_id.clone(),
        product_name,
        product_type,
        total_pcf: tenths_value(total_tenths),
        lifecycle_percents,
        component_percents,
        schema: profile.schema(),
    };
    (Document::new(doc_id, profile, raw_text, pages), record)
}

#[cfg(test)]
mod tests {
    use super::super::extract_document;
    use super::*;

    fn small(documents: usize) -> SynthConfig {
        SynthConfig {
            documents,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_identical_corpus() {
        let a = synthesize_corpus(&small(20), 7).unwrap();
        let b = synthesize_corpus(&small(20), 7).unwrap();
        assert_eq!(a, b);
        let c = synthesize_corpus(&small(20), 8).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn cardinality_matches_config() {
        let (docs, records) = synthesize_corpus(&small(200), 1).unwrap();
        assert_eq!(docs.len(), 200);
        assert_eq!(records.len(), 200);
        let ids: HashSet<_> = docs.iter().map(|d| &d.doc_id).collect();
        assert_eq!(ids.len(), 200);
    }

    #[test]
    fn full_shuffle_permutes_blocks_and_still_extracts() {
        let shuffled = SynthConfig {
            block_shuffle_prob: 1.0,
            ..small(40)
        };
        let canonical = SynthConfig {
            block_shuffle_prob: 0.0,
            ..small(40)
        };
        let (docs, records) = synthesize_corpus(&shuffled, 3).unwrap();
        let (plain, _) = synthesize_corpus(&canonical, 3).unwrap();
        let moved = docs
            .iter()
            .zip(&plain)
            .filter(|(a, b)| a.raw_text.lines().next() != b.raw_text.lines().next())
            .count();
        assert!(moved > 20, "only {moved} of 40 documents changed order");
        for (doc, record) in docs.iter().zip(&records) {
            assert_eq!(&extract_document(doc).unwrap(), record);
        }
    }

    #[test]
    fn component_sums_stay_within_tolerance() {
        let (_, records) = synthesize_corpus(&small(300), 11).unwrap();
        for record in &records {
            let sum = record.component_sum();
            assert!((99.0 - 1e-9..=101.0 + 1e-9).contains(&sum), "{sum}");
            let n = record.component_percents.len();
            assert!((4..=8).contains(&n));
        }
    }

    #[test]
    fn both_profiles_appear() {
        let (docs, _) = synthesize_corpus(&small(50), 2).unwrap();
        assert!(docs.iter().any(|d| d.company_profile == CompanyProfile::Hp));
        assert!(
            docs.iter()
                .any(|d| d.company_profile == CompanyProfile::Direct)
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert_eq!(
            synthesize_corpus(&small(0), 1).unwrap_err(),
            SynthError::NoDocuments
        );
        let bad = SynthConfig {
            spurious_token_rate: 1.5,
            ..small(3)
        };
        assert!(matches!(
            synthesize_corpus(&bad, 1),
            Err(SynthError::BadProbability {
                name: "spurious_token_rate",
                ..
            })
        ));
        let bad = SynthConfig {
            min_components: 9,
            max_components: 4,
            ..small(3)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn allocation_sums_to_one_thousand_tenths() {
        let shares = allocate_tenths(&[1.0, 2.0, 3.3, 9.9], 5);
        assert_eq!(shares.iter().sum::<u32>(), 1000);
        assert!(shares.iter().all(|&s| s >= 5));
    }

    #[test]
    fn document_sizes_are_report_like() {
        let (docs, _) = synthesize_corpus(&small(100), 5).unwrap();
        let words = docs.iter().map(|d| d.word_count).sum::<usize>() / docs.len();
        let chars = docs.iter().map(|d| d.char_count).sum::<usize>() / docs.len();
        assert!((400..700).contains(&words), "avg words {words}");
        assert!((2500..5000).contains(&chars), "avg chars {chars}");
    }
}
