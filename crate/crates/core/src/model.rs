//! Models evaluated on binary inputs, and rule-based binarization of tabular
//! data.
//!
//! Expression grammar for [`Model::BoolExpr`]:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary ('*' unary)*
//! unary   := '-' unary | primary
//! primary := number | 'x' index | '(' expr ')'
//! ```
//!
//! Variables are 1-based (`x1` is the first input). Numbers use the usual
//! decimal and exponent notation.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleSet;
use crate::subset::MAX_DIM;

/// Weights of the ten-input perceptron used in the dependence study.
pub const PERCEPTRON_WEIGHTS: [f64; 10] = [0.3, -0.7, -0.2, -0.1, 0.5, -0.1, 0.3, 0.8, 0.1, -0.9];
pub const PERCEPTRON_BIAS: f64 = 0.12;

/// Five-rule mushroom classifier; 1 means poisonous.
pub const MUSHROOM_EXPR: &str = "x1*x2*(x3 + (1-x3)*x4) + (1-x1)*(1-x5)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub enum Model {
    /// Output per configuration mask; length `2^d`.
    TruthTable {
        values: Vec<f64>,
    },
    /// `sign(wᵀx + b)` with `sign(0) = +1`.
    LinearThreshold {
        w: Vec<f64>,
        b: f64,
    },
    BoolExpr {
        source: String,
        ast: Expr,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based input index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn eval(&self, x: usize) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => ((x >> i) & 1) as f64,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
        }
    }

    /// Number of inputs the expression needs (largest variable index).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) => e.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.arity().max(b.arity()),
        }
    }

    /// 0-based indices of the variables that occur.
    pub fn variables(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => {
                if !out.contains(i) {
                    out.push(*i)
                }
            }
            Expr::Neg(e) => e.variables(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::ExpressionParse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(b'*') = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(b'-') = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            None => self.err("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'x' | b'X') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match digits.parse::<usize>() {
                    Ok(i) if (1..=MAX_DIM).contains(&i) => Ok(Expr::Var(i - 1)),
                    _ => {
                        self.pos = start;
                        self.err(format!("variable index must be in 1..={MAX_DIM}"))
                    }
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    let exp_sign = (c == b'+' || c == b'-')
                        && self.pos > start
                        && matches!(self.src[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match text.parse::<f64>() {
                    Ok(v) => Ok(Expr::Const(v)),
                    Err(_) => {
                        self.pos = start;
                        self.err(format!("bad number {text:?}"))
                    }
                }
            }
            Some(c) => self.err(format!("unexpected character {:?}", c as char)),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

impl Model {
    pub fn truth_table(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 || !n.is_power_of_two() || n.trailing_zeros() as usize > MAX_DIM {
            return Err(Error::InvalidModel(format!(
                "truth table length {n} is not 2^d"
            )));
        }
        Ok(Model::TruthTable { values })
    }

    pub fn linear_threshold(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.is_empty() || w.len() > MAX_DIM {
            return Err(Error::InvalidModel(format!("{} weights", w.len())));
        }
        Ok(Model::LinearThreshold { w, b })
    }

    pub fn bool_expr(source: &str) -> Result<Self> {
        let ast = parse_expr(source)?;
        Ok(Model::BoolExpr {
            source: source.to_string(),
            ast,
        })
    }

    pub fn perceptron() -> Self {
        Model::LinearThreshold {
            w: PERCEPTRON_WEIGHTS.to_vec(),
            b: PERCEPTRON_BIAS,
        }
    }

    pub fn mushroom() -> Self {
        Model::bool_expr(MUSHROOM_EXPR).expect("built-in expression parses")
    }

    /// Number of inputs the model requires. Expressions accept any larger
    /// dimension; tables and linear units need an exact match.
    pub fn arity(&self) -> usize {
        match self {
            Model::TruthTable { values } => values.len().trailing_zeros() as usize,
            Model::LinearThreshold { w, .. } => w.len(),
            Model::BoolExpr { ast, .. } => ast.arity(),
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        let ok = match self {
            Model::BoolExpr { ast, .. } => ast.arity() <= d,
            _ => self.arity() == d,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ArityMismatch {
                expected: self.arity(),
                got: d,
            })
        }
    }

    /// Evaluates at a configuration mask. The caller guarantees the mask fits
    /// the model arity (see [`Model::check_dim`]).
    pub fn eval_config(&self, x: usize) -> f64 {
        match self {
            Model::TruthTable { values } => values[x],
            Model::LinearThreshold { w, b } => {
                let s: f64 = w
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (x >> i) & 1 == 1)
                    .map(|(_, v)| v)
                    .sum::<f64>()
                    + b;
                if s >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Model::BoolExpr { ast, .. } => ast.eval(x),
        }
    }

    /// Evaluates at an explicit 0/1 vector.
    pub fn eval(&self, bits: &[u8]) -> Result<f64> {
        self.check_dim(bits.len())?;
        Ok(self.eval_config(crate::sample::bits_to_config(bits)?))
    }

    /// Model values over all `2^d` configurations.
    pub fn values(&self, d: usize) -> Result<Vec<f64>> {
        self.check_dim(d)?;
        if d > crate::pmf::DENSE_MAX_DIM {
            return Err(Error::DimensionTooLarge {
                d,
                limit: crate::pmf::DENSE_MAX_DIM,
            });
        }
        Ok((0..1usize << d).map(|x| self.eval_config(x)).collect())
    }

    pub fn truth_table_of(&self, d: usize) -> Result<Model> {
        Model::truth_table(self.values(d)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a model file. Structural JSON problems surface as
    /// [`Error::Json`], invalid contents as the model's own error.
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ModelFile>(s)?.try_into()
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelFile {
    TruthTable { values: Vec<f64> },
    LinearThreshold { w: Vec<f64>, b: f64 },
    BoolExpr { expr: String },
}

impl TryFrom<ModelFile> for Model {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        match f {
            ModelFile::TruthTable { values } => Model::truth_table(values),
            ModelFile::LinearThreshold { w, b } => Model::linear_threshold(w, b),
            ModelFile::BoolExpr { expr } => Model::bool_expr(&expr),
        }
    }
}

impl From<Model> for ModelFile {
    fn from(m: Model) -> Self {
        match m {
            Model::TruthTable { values } => ModelFile::TruthTable { values },
            Model::LinearThreshold { w, b } => ModelFile::LinearThreshold { w, b },
            Model::BoolExpr { source, .. } => ModelFile::BoolExpr { expr: source },
        }
    }
}

/// Default tolerance for flagging nearly constant rules.
pub const DEFAULT_QUASI_CONSTANT_EPS: f64 = 0.005;

/// Maps table columns to binary rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizationSpec {
    pub rules: Vec<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<LabelSpec>,
    /// Column names for files without a header row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default = "default_eps")]
    pub quasi_constant_eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_QUASI_CONSTANT_EPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub column: String,
    pub predicate: Predicate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    InSet { values: Vec<String> },
    NotInSet { values: Vec<String> },
    Threshold { cmp: Comparison, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Le,
    Lt,
    Ge,
    Gt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: String,
    /// Raw values mapped to the positive class; everything else is negative.
    pub positive: Vec<String>,
    pub encoding: LabelEncoding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelEncoding {
    ZeroOne,
    PlusMinusOne,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiConstantFlag {
    pub rule: String,
    pub q_hat: f64,
}

#[derive(Clone, Debug)]
pub struct Binarized {
    pub names: Vec<String>,
    pub samples: SampleSet,
    pub marginals: Vec<f64>,
    pub quasi_constant: Vec<QuasiConstantFlag>,
}

/// Column names of the UCI mushroom file, which ships without a header.
pub const MUSHROOM_COLUMNS: [&str; 23] = [
    "class",
    "cap-shape",
    "cap-surface",
    "cap-color",
    "bruises",
    "odor",
    "gill-attachment",
    "gill-spacing",
    "gill-size",
    "gill-color",
    "stalk-shape",
    "stalk-root",
    "stalk-surface-above-ring",
    "stalk-surface-below-ring",
    "stalk-color-above-ring",
    "stalk-color-below-ring",
    "veil-type",
    "veil-color",
    "ring-number",
    "ring-type",
    "spore-print-color",
    "population",
    "habitat",
];

impl BinarizationSpec {
    /// The five mushroom rules. Category sets list both the one-letter codes
    /// and the spelled-out names so either file flavour works.
    pub fn mushroom() -> Self {
        let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let rule = |name: &str, column: &str, values: &[&str]| Rule {
            name: name.into(),
            column: column.into(),
            predicate: Predicate::NotInSet {
                values: set(values),
            },
        };
        BinarizationSpec {
            rules: vec![
                rule("odor_not_none", "odor", &["n", "none"]),
                rule(
                    "stalk_root_not_club_or_rooted",
                    "stalk-root",
                    &["c", "club", "r", "rooted"],
                ),
                rule(
                    "gill_spacing_not_crowded",
                    "gill-spacing",
                    &["w", "crowded"],
                ),
                rule("not_bruised", "bruises", &["t", "true", "bruises"]),
                rule(
                    "spore_print_not_green",
                    "spore-print-color",
                    &["r", "green"],
                ),
            ],
            label: Some(LabelSpec {
                column: "class".into(),
                positive: set(&["p", "poisonous"]),
                encoding: LabelEncoding::ZeroOne,
            }),
            columns: Some(MUSHROOM_COLUMNS.iter().map(|s| s.to_string()).collect()),
            quasi_constant_eps: DEFAULT_QUASI_CONSTANT_EPS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rules.is_empty() || self.rules.len() > MAX_DIM {
            return Err(Error::InvalidSpec(format!("{} rules", self.rules.len())));
        }
        let mut seen = HashSet::new();
        for r in &self.rules {
            if !seen.insert(r.name.as_str()) {
                return Err(Error::InvalidSpec(format!(
                    "rule name {:?} repeated",
                    r.name
                )));
            }
        }
        if !(0.0..0.5).contains(&self.quasi_constant_eps) {
            return Err(Error::InvalidSpec(format!(
                "quasi_constant_eps {}",
                self.quasi_constant_eps
            )));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

impl Predicate {
    fn apply(&self, rule: &str, raw: &str) -> Result<bool> {
        let v = raw.trim();
        Ok(match self {
            Predicate::InSet { values } => values.iter().any(|c| c == v),
            Predicate::NotInSet { values } => !values.iter().any(|c| c == v),
            Predicate::Threshold { cmp, value } => {
                let u: f64 = v.parse().map_err(|_| Error::NonBinaryPredicateResult {
                    rule: rule.to_string(),
                    value: raw.to_string(),
                })?;
                match cmp {
                    Comparison::Le => u <= *value,
                    Comparison::Lt => u < *value,
                    Comparison::Ge => u >= *value,
                    Comparison::Gt => u > *value,
                }
            }
        })
    }
}

/// Applies the rules row by row. If the first record matches the declared
/// column names (or `spec.columns` is absent), it is treated as a header.
pub fn binarize<R: Read>(reader: R, spec: &BinarizationSpec) -> Result<Binarized> {
    spec.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::InsufficientSamples { n: 0, required: 1 }),
    };
    let first_names: Vec<String> = first.iter().map(|s| s.trim().to_string()).collect();
    let is_header = match &spec.columns {
        None => true,
        Some(cols) => {
            let referenced = spec
                .rules
                .iter()
                .map(|r| &r.column)
                .chain(spec.label.iter().map(|l| &l.column));
            referenced.clone().all(|c| first_names.contains(c)) || cols == &first_names
        }
    };
    let names: Vec<String> = if is_header {
        first_names
    } else {
        spec.columns.clone().unwrap_or_default()
    };
    let col = |name: &str| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let rule_cols = spec
        .rules
        .iter()
        .map(|r| col(&r.column))
        .collect::<Result<Vec<_>>>()?;
    let label_col = spec.label.as_ref().map(|l| col(&l.column)).transpose()?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let pending = if is_header { None } else { Some(first) };
    for rec in pending.into_iter().map(Ok).chain(records) {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::Parse(format!(
                "record with {} fields, expected {}",
                rec.len(),
                names.len()
            )));
        }
        let mut x = 0usize;
        for (bit, (rule, &c)) in spec.rules.iter().zip(&rule_cols).enumerate() {
            if rule.predicate.apply(&rule.name, &rec[c])? {
                x |= 1 << bit;
            }
        }
        rows.push(x);
        if let (Some(l), Some(c)) = (&spec.label, label_col) {
            let pos = l.positive.iter().any(|p| p == rec[c].trim());
            labels.push(match (pos, l.encoding) {
                (true, _) => 1.0,
                (false, LabelEncoding::ZeroOne) => 0.0,
                (false, LabelEncoding::PlusMinusOne) => -1.0,
            });
        }
    }
    let d = spec.rules.len();
    let mut samples = SampleSet::new(d, rows)?;
    if spec.label.is_some() {
        samples = samples.with_outputs(labels)?;
    }
    let n = samples.len() as f64;
    let marginals: Vec<f64> = (0..d)
        .map(|i| {
            samples
                .rows()
                .iter()
                .filter(|&&x| (x >> i) & 1 == 1)
                .count() as f64
                / n
        })
        .collect();
    let eps = spec.quasi_constant_eps;
    let quasi_constant = spec
        .rules
        .iter()
        .zip(&marginals)
        .filter(|(_, &q)| q < eps || q > 1.0 - eps)
        .map(|(r, &q)| QuasiConstantFlag {
            rule: r.name.clone(),
            q_hat: q,
        })
        .collect();
    Ok(Binarized {
        names: spec.rules.iter().map(|r| r.name.clone()).collect(),
        samples,
        marginals,
        quasi_constant,
    })
}

pub fn binarize_path(path: impl AsRef<Path>, spec: &BinarizationSpec) -> Result<Binarized> {
    binarize(std::fs::File::open(path)?, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perceptron_examples() {
        let m = Model::perceptron();
        assert_eq!(m.arity(), 10);
        assert_eq!(m.eval(&[0; 10]).unwrap(), 1.0);
        assert!(PERCEPTRON_WEIGHTS.iter().sum::<f64>().abs() < 1e-12);
        let vals = m.values(10).unwrap();
        assert!(vals.iter().all(|&v| v == 1.0 || v == -1.0));
        assert!(vals.contains(&-1.0));
        assert!(matches!(
            m.eval(&[0; 9]),
            Err(Error::ArityMismatch {
                expected: 10,
                got: 9
            })
        ));
    }

    #[test]
    fn sign_of_zero_is_positive() {
        let m = Model::linear_threshold(vec![1.0, -1.0], 0.0).unwrap();
        assert_eq!(m.eval(&[1, 1]).unwrap(), 1.0);
        assert_eq!(m.eval(&[0, 1]).unwrap(), -1.0);
    }

    #[test]
    fn mushroom_examples() {
        let m = Model::mushroom();
        assert_eq!(m.arity(), 5);
        assert_eq!(m.eval(&[0, 1, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(m.eval(&[1, 1, 1, 0, 1]).unwrap(), 1.0);
        assert_eq!(m.eval(&[1, 0, 1, 1, 1]).unwrap(), 0.0);
        // Hand-expanded oracle over all 32 inputs.
        for x in 0..32usize {
            let b = |i: usize| ((x >> (i - 1)) & 1) as i32;
            let want = b(1) * b(2) * (b(3) + (1 - b(3)) * b(4)) + (1 - b(1)) * (1 - b(5));
            assert_eq!(m.eval_config(x), want as f64);
        }
    }

    #[test]
    fn parser() {
        let e = parse_expr("-2.5e-1*x2 + 3 - (x1)").unwrap();
        assert_eq!(e.arity(), 2);
        assert_eq!(e.eval(0b11), -0.25 + 3.0 - 1.0);
        assert_eq!(parse_expr("--x1").unwrap().eval(1), 1.0);
        assert_eq!(parse_expr("1 - 2 - 3").unwrap().eval(0), -4.0);
        for bad in ["", "x0", "x1 +", "(x1", "x1 x2", "y", "1..2"] {
            assert!(
                matches!(parse_expr(bad), Err(Error::ExpressionParse { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn json_formats() {
        let m = Model::from_json(r#"{"kind":"bool_expr","expr":"x1*x2"}"#).unwrap();
        assert_eq!(m.eval(&[1, 1]).unwrap(), 1.0);
        let m = Model::from_json(r#"{"kind":"truth_table","values":[0,1,2,3]}"#).unwrap();
        assert_eq!(m.eval(&[0, 1]).unwrap(), 2.0);
        let m = Model::perceptron();
        assert_eq!(Model::from_json(&m.to_json().unwrap()).unwrap(), m);
        assert!(Model::from_json(r#"{"kind":"truth_table","values":[0,1,2]}"#).is_err());
        let v: serde_json::Value =
            serde_json::from_str(&Model::mushroom().to_json().unwrap()).unwrap();
        assert_eq!(v["kind"], "bool_expr");
        assert_eq!(v["expr"], MUSHROOM_EXPR);
    }

    #[test]
    fn truth_table_roundtrip() {
        for d in 1..=10 {
            let m =
                Model::linear_threshold((0..d).map(|i| (i as f64 * 0.37).sin()).collect(), 0.05)
                    .unwrap();
            let t = m.truth_table_of(d).unwrap();
            for x in 0..1usize << d {
                assert_eq!(t.eval_config(x), m.eval_config(x));
            }
        }
    }

    fn simple_spec() -> BinarizationSpec {
        BinarizationSpec::from_json(
            r#"{"rules":[
                {"name":"a","column":"color","predicate":{"op":"in_set","values":["red"]}},
                {"name":"b","column":"size","predicate":{"op":"threshold","cmp":"le","value":2.5}},
                {"name":"c","column":"color","predicate":{"op":"in_set","values":[]}}
            ],
            "label":{"column":"y","positive":["yes"],"encoding":"plus_minus_one"}}"#,
        )
        .unwrap()
    }

    #[test]
    fn binarize_rules() {
        let csv = "color,size,y\nred,1,yes\nblue,3,no\nred,2.5,no\n";
        let b = binarize(csv.as_bytes(), &simple_spec()).unwrap();
        assert_eq!(b.samples.rows(), &[0b011, 0b000, 0b011]);
        assert_eq!(b.samples.outputs(), Some(&[1.0, -1.0, -1.0][..]));
        assert_eq!(
            b.quasi_constant,
            vec![QuasiConstantFlag {
                rule: "c".into(),
                q_hat: 0.0
            }]
        );
        assert!(matches!(
            binarize("colour,size,y\nred,1,yes\n".as_bytes(), &simple_spec()),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            binarize("color,size,y\nred,big,yes\n".as_bytes(), &simple_spec()),
            Err(Error::NonBinaryPredicateResult { .. })
        ));
    }

    #[test]
    fn duplicate_rule_names_rejected() {
        let r = BinarizationSpec::from_json(
            r#"{"rules":[{"name":"a","column":"c","predicate":{"op":"in_set","values":[]}},
                          {"name":"a","column":"c","predicate":{"op":"in_set","values":[]}}]}"#,
        );
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn mushroom_headerless_rows() {
        // Two rows in the UCI layout.
        let rows = "p,x,s,n,t,p,f,c,n,k,e,e,s,s,w,w,p,w,o,p,k,s,u\n\
                    e,x,s,y,t,n,f,c,b,k,e,c,s,s,w,w,p,w,o,p,r,n,g\n";
        let b = binarize(rows.as_bytes(), &BinarizationSpec::mushroom()).unwrap();
        // Row 1: odor p (≠ none) → 1; stalk-root e → 1; spacing c → 1; bruises t → 0; spore k → 1.
        // Row 2: odor n → 0; stalk-root c → 0; spacing c → 1; bruises t → 0; spore r → 0.
        assert_eq!(b.samples.rows(), &[0b10111, 0b00100]);
        assert_eq!(b.samples.outputs(), Some(&[1.0, 0.0][..]));
    }
}
