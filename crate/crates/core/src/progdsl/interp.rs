use std::collections::HashMap;

use super::ast::{BinOp, Builtin, Expr, Program};
use super::{ANSWER_VAR, AnswerItem, AnswerList, ExecError, STEP_LIMIT};

/// Runtime value of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
    List(Vec<Value>),
    Dict(Vec<(String, Value)>),
    /// Key-value pair produced by the builtins.
    Pair(String, f64),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Dict(_) => "dict",
            Value::Pair(..) => "pair",
        }
    }
}

struct Interpreter {
    scope: HashMap<String, Value>,
    steps: usize,
}

/// Executes a parsed program in a fresh scope and returns its `answer` list.
pub fn execute(program: &Program) -> Result<AnswerList, ExecError> {
    let mut interp = Interpreter {
        scope: HashMap::new(),
        steps: 0,
    };
    for stmt in &program.statements {
        interp.tick()?;
        let value = interp.eval(&stmt.value)?;
        interp.scope.insert(stmt.target.clone(), value);
    }
    let answer = interp
        .scope
        .remove(ANSWER_VAR)
        .ok_or(ExecError::MissingAnswer)?;
    to_answer_list(answer)
}

fn to_answer_list(value: Value) -> Result<AnswerList, ExecError> {
    let Value::List(items) = value else {
        return Err(ExecError::TypeError(format!(
            "`answer` must be a list, got {}",
            value.kind()
        )));
    };
    items
        .into_iter()
        .map(|item| match item {
            Value::Num(v) => Ok(AnswerItem::Number(v)),
            Value::Pair(name, v) => Ok(AnswerItem::Labeled(name, v)),
            Value::List(pair) => match pair.as_slice() {
                [Value::Str(name), Value::Num(v)] => Ok(AnswerItem::Labeled(name.clone(), *v)),
                _ => Err(ExecError::TypeError(
                    "nested lists in `answer` must be [name, number] pairs".into(),
                )),
            },
            other => Err(ExecError::TypeError(format!(
                "`answer` items must be numbers or pairs, got {}",
                other.kind()
            ))),
        })
        .collect()
}

impl Interpreter {
    fn tick(&mut self) -> Result<(), ExecError> {
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            Err(ExecError::StepLimitExceeded)
        } else {
            Ok(())
        }
    }

    fn eval(&mut self, expr: &Expr) -> Result<Value, ExecError> {
        self.tick()?;
        match expr {
            Expr::Number(v) => Ok(Value::Num(*v)),
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Var(name) => self
                .scope
                .get(name)
                .cloned()
                .ok_or_else(|| ExecError::UndefinedVariable(name.clone())),
            Expr::Neg(inner) => {
                let v = self.number(inner, "unary `-`")?;
                Ok(Value::Num(-v))
            }
            Expr::Binary(op, lhs, rhs) => {
                let what = format!("`{}`", op.symbol());
                let a = self.number(lhs, &what)?;
                let b = self.number(rhs, &what)?;
                arithmetic(*op, a, b).map(Value::Num)
            }
            Expr::List(items) => items
                .iter()
                .map(|item| self.eval(item))
                .collect::<Result<_, _>>()
                .map(Value::List),
            Expr::Dict(entries) => entries
                .iter()
                .map(|(key, value)| Ok((key.clone(), self.eval(value)?)))
                .collect::<Result<_, ExecError>>()
                .map(Value::Dict),
            Expr::Call(builtin, args) => self.call(*builtin, args),
        }
    }

    fn number(&mut self, expr: &Expr, context: &str) -> Result<f64, ExecError> {
        match self.eval(expr)? {
            Value::Num(v) => Ok(v),
            other => Err(ExecError::TypeError(format!(
                "{context} expects numbers, got {}",
                other.kind()
            ))),
        }
    }

    fn call(&mut self, builtin: Builtin, args: &[Expr]) -> Result<Value, ExecError> {
        let dict = match self.eval(&args[0])? {
            Value::Dict(entries) => entries,
            other => {
                return Err(ExecError::TypeError(format!(
                    "`{}` expects a dict, got {}",
                    builtin.name(),
                    other.kind()
                )));
            }
        };
        match builtin {
            Builtin::MaxByValue | Builtin::MinByValue => {
                let entries = numeric_entries(builtin, dict)?;
                let pick = if builtin == Builtin::MaxByValue {
                    extreme(&entries, |candidate, best| candidate > best)
                } else {
                    extreme(&entries, |candidate, best| candidate < best)
                };
                let (name, value) = pick.ok_or_else(|| {
                    ExecError::TypeError(format!("`{}` of an empty dict", builtin.name()))
                })?;
                Ok(Value::Pair(name, value))
            }
            Builtin::TopN => {
                let n = match self.eval(&args[1])? {
                    Value::Num(v) if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                        v as usize
                    }
                    other => {
                        return Err(ExecError::TypeError(format!(
                            "`top_n` expects a positive integer count, got {other:?}"
                        )));
                    }
                };
                let entries = top_n(&dict, n)?;
                Ok(Value::List(
                    entries
                        .into_iter()
                        .map(|item| match item {
                            AnswerItem::Labeled(name, v) => Value::Pair(name, v),
                            AnswerItem::Number(v) => Value::Num(v),
                        })
                        .collect(),
                ))
            }
        }
    }
}

fn arithmetic(op: BinOp, a: f64, b: f64) -> Result<f64, ExecError> {
    let result = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(ExecError::DivisionByZero);
            }
            a / b
        }
    };
    if result.is_finite() {
        Ok(result)
    } else {
        Err(ExecError::TypeError("arithmetic overflow".into()))
    }
}

fn numeric_entries(
    builtin: Builtin,
    dict: Vec<(String, Value)>,
) -> Result<Vec<(String, f64)>, ExecError> {
    dict.into_iter()
        .map(|(key, value)| match value {
            Value::Num(v) => Ok((key, v)),
            other => Err(ExecError::TypeError(format!(
                "`{}` expects numeric values, `{key}` is a {}",
                builtin.name(),
                other.kind()
            ))),
        })
        .collect()
}

/// First entry that no later entry beats; earlier entries win ties.
fn extreme(entries: &[(String, f64)], beats: impl Fn(f64, f64) -> bool) -> Option<(String, f64)> {
    let mut best: Option<&(String, f64)> = None;
    for entry in entries {
        match best {
            Some(b) if !beats(entry.1, b.1) => {}
            _ => best = Some(entry),
        }
    }
    best.cloned()
}

/// The `n` largest entries of `dict` by value, descending, as labeled
/// items. Equal values keep dict insertion order; `n` larger than the dict
/// returns every entry.
pub fn top_n(dict: &[(String, Value)], n: usize) -> Result<AnswerList, ExecError> {
    let entries = numeric_entries(Builtin::TopN, dict.to_vec())?;
    Ok(top_n_entries(&entries, n)
        .into_iter()
        .map(|(name, v)| AnswerItem::Labeled(name, v))
        .collect())
}

/// Numeric core of [`top_n`].
pub fn top_n_entries(entries: &[(String, f64)], n: usize) -> Vec<(String, f64)> {
    let mut sorted = entries.to_vec();
    // stable: ties keep insertion order
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    sorted.truncate(n);
    sorted
}

#[cfg(test)]
mod tests {
    use super::super::{parse, run_source};
    use super::*;

    fn labeled(name: &str, v: f64) -> AnswerItem {
        AnswerItem::Labeled(name.into(), v)
    }

    fn dict(entries: &[(&str, f64)]) -> Vec<(String, Value)> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), Value::Num(*v)))
            .collect()
    }

    #[test]
    fn straight_line_arithmetic() {
        assert_eq!(
            run_source("x=2\ny=x*3\nanswer=[y]").unwrap(),
            vec![AnswerItem::Number(6.0)]
        );
    }

    #[test]
    fn template_program_yields_expected_values() {
        let src = "total_carbon=505.0
manufacturing_percent=0.5
manufacturing_carbon=total_carbon*manufacturing_percent
display_percent=0.24
display_carbon=total_carbon*manufacturing_percent*display_percent
answer=[manufacturing_carbon,display_carbon]";
        let answers = run_source(src).unwrap();
        assert_eq!(answers.len(), 2);
        assert!((answers[0].value() - 252.5).abs() < 1e-9);
        assert!((answers[1].value() - 60.6).abs() < 1e-9);
    }

    #[test]
    fn max_by_value_returns_labeled_pair() {
        assert_eq!(
            run_source(r#"answer=[max_by_value({"display":24,"mainboard":30})]"#).unwrap(),
            vec![labeled("mainboard", 30.0)]
        );
    }

    #[test]
    fn min_by_value_prefers_first_on_ties() {
        assert_eq!(
            run_source(r#"answer=[min_by_value({"a":2,"b":1,"c":1})]"#).unwrap(),
            vec![labeled("b", 1.0)]
        );
    }

    #[test]
    fn division_by_zero_is_reported() {
        assert_eq!(run_source("x=1/0").unwrap_err(), ExecError::DivisionByZero);
    }

    #[test]
    fn missing_answer_is_reported() {
        assert_eq!(run_source("x=1").unwrap_err(), ExecError::MissingAnswer);
    }

    #[test]
    fn undefined_variable_is_reported() {
        assert_eq!(
            run_source("answer=[y]").unwrap_err(),
            ExecError::UndefinedVariable("y".into())
        );
    }

    #[test]
    fn arithmetic_on_dict_is_a_type_error() {
        assert!(matches!(
            run_source(
                r#"d={"a":1}
answer=[d*2]"#
            )
            .unwrap_err(),
            ExecError::TypeError(_)
        ));
    }

    #[test]
    fn scalar_answer_is_a_type_error() {
        assert!(matches!(
            run_source("answer=3").unwrap_err(),
            ExecError::TypeError(_)
        ));
    }

    #[test]
    fn top_n_result_can_be_the_answer() {
        assert_eq!(
            run_source(r#"answer=top_n({"a":5,"b":9,"c":7},2)"#).unwrap(),
            vec![labeled("b", 9.0), labeled("c", 7.0)]
        );
    }

    #[test]
    fn name_value_list_literals_become_labeled_items() {
        assert_eq!(
            run_source(r#"answer=[["ssd",21.0], 3]"#).unwrap(),
            vec![labeled("ssd", 21.0), AnswerItem::Number(3.0)]
        );
    }

    #[test]
    fn top_n_builtin_examples() {
        assert_eq!(
            top_n(&dict(&[("a", 5.0), ("b", 9.0), ("c", 7.0)]), 2).unwrap(),
            vec![labeled("b", 9.0), labeled("c", 7.0)]
        );
        assert_eq!(
            top_n(&dict(&[("a", 5.0)]), 3).unwrap(),
            vec![labeled("a", 5.0)]
        );
        assert_eq!(
            top_n(&dict(&[("a", 5.0), ("b", 5.0)]), 1).unwrap(),
            vec![labeled("a", 5.0)]
        );
    }

    #[test]
    fn top_n_rejects_non_numeric_values() {
        let d = vec![("a".to_string(), Value::Str("x".into()))];
        assert!(matches!(top_n(&d, 1), Err(ExecError::TypeError(_))));
    }

    #[test]
    fn top_n_count_must_be_positive_integer() {
        for n in ["0", "1.5", "-2"] {
            let src = format!(r#"answer=top_n({{"a":1}},{n})"#);
            assert!(
                matches!(run_source(&src), Err(ExecError::TypeError(_))),
                "{n}"
            );
        }
    }

    #[test]
    fn step_limit_bounds_long_programs() {
        let mut src = String::from("x=1\n");
        for _ in 0..4_000 {
            src.push_str("x=x+1\n");
        }
        src.push_str("answer=[x]");
        let program = parse(&src).unwrap();
        assert_eq!(execute(&program).unwrap_err(), ExecError::StepLimitExceeded);
    }

    #[test]
    fn moderate_programs_stay_under_step_limit() {
        let mut src = String::from("x=1\n");
        for _ in 0..1_000 {
            src.push_str("x=x+1\n");
        }
        src.push_str("answer=[x]");
        assert_eq!(run_source(&src).unwrap(), vec![AnswerItem::Number(1001.0)]);
    }

    #[test]
    fn reassignment_uses_latest_value() {
        assert_eq!(
            run_source("x=1\nx=x*5\nanswer=[x, -x]").unwrap(),
            vec![AnswerItem::Number(5.0), AnswerItem::Number(-5.0)]
        );
    }
}
