use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{CompanyProfile, Schema};

/// Numeric capture: an integer with an optional decimal part.
pub const NUMBER_PATTERN: &str = r"\d+(?:\.\d+)?";

/// A component in the fixed catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentInfo {
    /// Canonical identifier, also used as the program variable prefix.
    pub name: &'static str,
    /// Phrase used in question text.
    pub display: &'static str,
    /// Row label in lifecycle-style reports.
    pub hp_label: &'static str,
    /// Row label in direct-component reports.
    pub direct_label: &'static str,
}

pub const COMPONENTS: [ComponentInfo; 10] = [
    ComponentInfo {
        name: "ssd",
        display: "ssd",
        hp_label: "Solid State Drive (SSD)",
        direct_label: "SSD",
    },
    ComponentInfo {
        name: "batteries",
        display: "batteries",
        hp_label: "Batteries",
        direct_label: "Batteries",
    },
    ComponentInfo {
        name: "chassis",
        display: "chassis",
        hp_label: "Chassis",
        direct_label: "Chassis",
    },
    ComponentInfo {
        name: "mainboard",
        display: "mainboard",
        hp_label: "Mainboard and other boards",
        direct_label: "Mainboard",
    },
    ComponentInfo {
        name: "display",
        display: "display",
        hp_label: "Display",
        direct_label: "Display",
    },
    ComponentInfo {
        name: "hdd",
        display: "hdd",
        hp_label: "Hard Disk Drive (HDD)",
        direct_label: "HDD",
    },
    ComponentInfo {
        name: "psu",
        display: "power supply",
        hp_label: "Power Supply Unit (PSU)",
        direct_label: "Power supply",
    },
    ComponentInfo {
        name: "packaging",
        display: "packaging",
        hp_label: "Packaging",
        direct_label: "Packaging",
    },
    ComponentInfo {
        name: "memory",
        display: "memory",
        hp_label: "Memory",
        direct_label: "Memory",
    },
    ComponentInfo {
        name: "cables",
        display: "cables",
        hp_label: "Cables",
        direct_label: "Cables",
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageInfo {
    pub name: &'static str,
    pub display: &'static str,
    pub label: &'static str,
}

pub const LIFECYCLE_STAGES: [StageInfo; 4] = [
    StageInfo {
        name: "manufacturing",
        display: "manufacturing",
        label: "Manufacturing",
    },
    StageInfo {
        name: "distribution",
        display: "distribution",
        label: "Distribution",
    },
    StageInfo {
        name: "use",
        display: "use",
        label: "Use",
    },
    StageInfo {
        name: "end_of_life",
        display: "end of life",
        label: "End of life",
    },
];

pub fn component_info(name: &str) -> Option<&'static ComponentInfo> {
    COMPONENTS.iter().find(|c| c.name == name)
}

pub fn stage_info(name: &str) -> Option<&'static StageInfo> {
    LIFECYCLE_STAGES.iter().find(|s| s.name == name)
}

/// What a pattern's capture feeds in the extraction record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldKind {
    ProductName,
    ProductType,
    TotalPcf,
    Stage(String),
    Component(String),
}

impl FieldKind {
    pub fn is_numeric(&self) -> bool {
        !matches!(self, FieldKind::ProductName | FieldKind::ProductType)
    }
}

#[derive(Debug, Clone)]
pub struct FieldPattern {
    pub field: String,
    pub kind: FieldKind,
    pub regex: Regex,
    /// A required field that matches zero times discards the document.
    pub required: bool,
}

/// Ordered field-name to pattern dictionary for one report layout.
#[derive(Debug, Clone)]
pub struct ExtractorProfile {
    pub profile_id: String,
    pub schema: Schema,
    pub fields: Vec<FieldPattern>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("pattern for `{field}` does not compile: {source}")]
    BadPattern { field: String, source: regex::Error },
    #[error("pattern for `{field}` must have exactly one capture group, found {found}")]
    CaptureCount { field: String, found: usize },
}

impl ExtractorProfile {
    pub fn new(profile_id: impl Into<String>, schema: Schema) -> Self {
        ExtractorProfile {
            profile_id: profile_id.into(),
            schema,
            fields: Vec::new(),
        }
    }

    /// Adds a field pattern. Each pattern must compile and carry exactly one
    /// capture group holding the value.
    pub fn with_field(
        mut self,
        field: impl Into<String>,
        kind: FieldKind,
        pattern: &str,
        required: bool,
    ) -> Result<Self, ProfileError> {
        let field = field.into();
        let regex = Regex::new(pattern).map_err(|source| ProfileError::BadPattern {
            field: field.clone(),
            source,
        })?;
        let groups = regex.captures_len() - 1;
        if groups != 1 {
            return Err(ProfileError::CaptureCount {
                field,
                found: groups,
            });
        }
        self.fields.push(FieldPattern {
            field,
            kind,
            regex,
            required,
        });
        Ok(self)
    }

    /// `(field, pattern source)` pairs in declaration order.
    pub fn field_patterns(&self) -> impl Iterator<Item = (&str, &str)> {
        self.fields
            .iter()
            .map(|f| (f.field.as_str(), f.regex.as_str()))
    }
}

fn percent_pattern(label: &str, separator: &str) -> String {
    format!(
        r"\b{}{separator}\s*({NUMBER_PATTERN})\s*%",
        regex::escape(label)
    )
}

fn line_capture(prefix: &str) -> String {
    format!(r"(?m){}[ \t]*(\S[^\n]*?)[ \t]*$", regex::escape(prefix))
}

fn build_hp() -> Result<ExtractorProfile, ProfileError> {
    let mut profile = ExtractorProfile::new("hp", Schema::LifecycleBreakdown)
        .with_field(
            "product_name",
            FieldKind::ProductName,
            &line_capture("Product name:"),
            true,
        )?
        .with_field(
            "product_type",
            FieldKind::ProductType,
            &line_capture("Product type:"),
            true,
        )?
        .with_field(
            "total_pcf",
            FieldKind::TotalPcf,
            &format!(r"Product Carbon Footprint \(PCF\)\s*({NUMBER_PATTERN})\s*kgCO2e"),
            true,
        )?;
    for stage in &LIFECYCLE_STAGES {
        profile = profile.with_field(
            stage.name,
            FieldKind::Stage(stage.name.into()),
            &percent_pattern(stage.label, ""),
            stage.name == "manufacturing",
        )?;
    }
    for component in &COMPONENTS {
        profile = profile.with_field(
            component.name,
            FieldKind::Component(component.name.into()),
            &percent_pattern(component.hp_label, ""),
            false,
        )?;
    }
    Ok(profile)
}

fn build_direct() -> Result<ExtractorProfile, ProfileError> {
    let mut profile = ExtractorProfile::new("direct", Schema::DirectComponent)
        .with_field(
            "product_name",
            FieldKind::ProductName,
            &line_capture("Model:"),
            true,
        )?
        .with_field(
            "product_type",
            FieldKind::ProductType,
            &line_capture("Category:"),
            true,
        )?
        .with_field(
            "total_pcf",
            FieldKind::TotalPcf,
            &format!(r"Total carbon footprint:\s*({NUMBER_PATTERN})\s*kg CO2e"),
            true,
        )?;
    for component in &COMPONENTS {
        profile = profile.with_field(
            component.name,
            FieldKind::Component(component.name.into()),
            &percent_pattern(component.direct_label, ":"),
            false,
        )?;
    }
    Ok(profile)
}

static HP: LazyLock<ExtractorProfile> =
    LazyLock::new(|| build_hp().expect("built-in hp profile is valid"));
static DIRECT: LazyLock<ExtractorProfile> =
    LazyLock::new(|| build_direct().expect("built-in direct profile is valid"));

pub fn builtin_profile(profile: CompanyProfile) -> &'static ExtractorProfile {
    match profile {
        CompanyProfile::Hp => &HP,
        CompanyProfile::Direct => &DIRECT,
    }
}

pub fn builtin_profiles() -> [&'static ExtractorProfile; 2] {
    [&HP, &DIRECT]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_compile_with_one_capture_each() {
        for profile in builtin_profiles() {
            assert!(profile.fields.len() >= 13);
            for field in &profile.fields {
                assert_eq!(field.regex.captures_len(), 2, "{}", field.field);
            }
        }
    }

    #[test]
    fn bad_patterns_are_rejected() {
        let base = ExtractorProfile::new("x", Schema::DirectComponent);
        assert!(matches!(
            base.clone()
                .with_field("a", FieldKind::TotalPcf, r"(\d+", true),
            Err(ProfileError::BadPattern { .. })
        ));
        assert!(matches!(
            base.with_field("a", FieldKind::TotalPcf, r"(\d+)(\.\d+)?", true),
            Err(ProfileError::CaptureCount { found: 2, .. })
        ));
    }

    #[test]
    fn ssd_pattern_matches_decimal_and_integer_values() {
        let field = HP.fields.iter().find(|f| f.field == "ssd").unwrap();
        let caps = field.regex.captures("Solid State Drive (SSD) 21%").unwrap();
        assert_eq!(&caps[1], "21");
        let caps = field
            .regex
            .captures("Solid State Drive (SSD)\n\n21.5 %")
            .unwrap();
        assert_eq!(&caps[1], "21.5");
        assert!(field.regex.captures("Solid State Drive (SSD) 21").is_none());
    }

    #[test]
    fn catalog_names_are_unique_identifiers() {
        let mut names: Vec<&str> = COMPONENTS
            .iter()
            .map(|c| c.name)
            .chain(LIFECYCLE_STAGES.iter().map(|s| s.name))
            .collect();
        let total = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), total);
        assert!(
            names
                .iter()
                .all(|n| n.chars().all(|c| c.is_ascii_lowercase() || c == '_'))
        );
    }
}
