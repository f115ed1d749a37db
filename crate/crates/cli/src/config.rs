//! Experiment configuration: one JSON object per experiment, parsed strictly.
//!
//! Parsing walks the document by hand instead of deriving `Deserialize` so that
//! every problem is reported with its dotted key path and all problems are
//! reported at once.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use hawkes_scaling::kernel::{BSchedule, KernelSpec, MatrixSpec};
use hawkes_scaling::limits::{FractionalNormalization, Regime};
use serde::Serialize;
use serde_json::{Map, Value};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 1.0;
pub const DEFAULT_PATHS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Resolvent,
    Hawkes,
    Meanfield,
    Limit,
    RegimeCompare,
    AcceptanceSuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Resolvent => "resolvent",
            Kind::Hawkes => "hawkes",
            Kind::Meanfield => "meanfield",
            Kind::Limit => "limit",
            Kind::RegimeCompare => "regime-compare",
            Kind::AcceptanceSuite => "acceptance-suite",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Kind::Resolvent, Kind::Hawkes, Kind::Meanfield, Kind::Limit, Kind::RegimeCompare, Kind::AcceptanceSuite]
            .into_iter()
            .find(|k| k.name() == s)
    }

    /// Top-level keys accepted besides the common ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Kind::Resolvent => &["kernel", "family", "z"],
            Kind::Hawkes => &["kernel", "family", "baseline", "method"],
            Kind::Meanfield => &["kernel", "family", "meanfield"],
            Kind::Limit => &["limit"],
            Kind::RegimeCompare => &["limit", "regime", "family", "meanfield"],
            Kind::AcceptanceSuite => &["criteria"],
        }
    }
}

const COMMON_KEYS: [&str; 5] = ["kind", "seed", "grid", "paths", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub h: f64,
}

/// Nearly unstable family `φⁿ = a_n b_n φ(b_n ·)` with limit baseline `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyConfig {
    pub base: KernelSpec,
    pub c: f64,
    pub schedule: BSchedule,
    pub gap_exponent: f64,
    pub a: Vec<f64>,
    /// Member indices; for particle systems the indices are the particle counts.
    pub n: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Thinning,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldConfig {
    pub n: Vec<usize>,
    #[serde(rename = "K")]
    pub k: usize,
    pub mu0: Option<f64>,
    pub beta: Option<f64>,
    pub coupled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitSource {
    /// `Φ(z) = m + λ z^α`.
    Triplet { m: f64, lambda: f64, alpha: f64 },
    Fractional { alpha: f64, normalization: FractionalNormalization },
    Cir { b: f64, a: f64, sigma: f64, xi0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitConfig {
    pub source: LimitSource,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub grid: GridConfig,
    pub paths: usize,
    /// Where artifacts go; not part of the experiment identity.
    #[serde(skip)]
    pub output: PathBuf,
    pub kernel: Option<KernelSpec>,
    pub family: Option<FamilyConfig>,
    pub baseline: Vec<f64>,
    pub method: Method,
    pub z: Vec<f64>,
    pub meanfield: Option<MeanFieldConfig>,
    pub limit: Option<LimitConfig>,
    pub regime: Option<Regime>,
    pub criteria: Vec<u8>,
}

/// One problem with a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for issue in &self.0 {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl ConfigErrors {
    pub fn mentions(&self, key: &str) -> bool {
        self.0.iter().any(|i| i.key == key || i.message.contains(key))
    }
}

#[derive(Default)]
struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn push(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(ConfigIssue { key: key.to_string(), message: message.into() });
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// An object whose keys are checked off as they are read.
struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: BTreeSet<&'a str>,
}

impl<'a> Obj<'a> {
    fn new(path: &str, value: &'a Value, issues: &mut Issues) -> Option<Self> {
        match value {
            Value::Object(map) => Some(Self { path: path.to_string(), map, seen: BTreeSet::new() }),
            _ => {
                issues.push(path, "must be an object");
                None
            }
        }
    }

    fn key(&self, k: &str) -> String {
        join(&self.path, k)
    }

    fn get(&mut self, k: &str) -> Option<&'a Value> {
        let (key, v) = self.map.get_key_value(k)?;
        self.seen.insert(key.as_str());
        Some(v)
    }

    fn f64(&mut self, k: &str, issues: &mut Issues) -> Option<f64> {
        let key = self.key(k);
        let v = self.get(k)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                issues.push(&key, "must be a finite number");
                None
            }
        }
    }

    fn required_f64(&mut self, k: &str, issues: &mut Issues) -> Option<f64> {
        if !self.map.contains_key(k) {
            issues.push(&self.key(k), "is required");
            return None;
        }
        self.f64(k, issues)
    }

    fn u64(&mut self, k: &str, issues: &mut Issues) -> Option<u64> {
        let key = self.key(k);
        let v = self.get(k)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                issues.push(&key, "must be a nonnegative integer");
                None
            }
        }
    }

    fn bool(&mut self, k: &str, issues: &mut Issues) -> Option<bool> {
        let key = self.key(k);
        let v = self.get(k)?;
        match v.as_bool() {
            Some(b) => Some(b),
            None => {
                issues.push(&key, "must be true or false");
                None
            }
        }
    }

    fn str(&mut self, k: &str, issues: &mut Issues) -> Option<&'a str> {
        let key = self.key(k);
        let v = self.get(k)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                issues.push(&key, "must be a string");
                None
            }
        }
    }

    /// A number or an array of numbers.
    fn f64_list(&mut self, k: &str, issues: &mut Issues) -> Option<Vec<f64>> {
        let key = self.key(k);
        let v = self.get(k)?;
        number_list(&key, v, issues)
    }

    fn u64_list(&mut self, k: &str, issues: &mut Issues) -> Option<Vec<u64>> {
        let key = self.key(k);
        let v = self.get(k)?;
        let items: Vec<&Value> = match v {
            Value::Array(a) => a.iter().collect(),
            other => vec![other],
        };
        let out: Option<Vec<u64>> = items.iter().map(|x| x.as_u64()).collect();
        if out.is_none() || items.is_empty() {
            issues.push(&key, "must be a nonnegative integer or a nonempty array of them");
        }
        out.filter(|o| !o.is_empty())
    }

    /// Reports keys that were never read.
    fn finish(self, issues: &mut Issues) {
        for k in self.map.keys() {
            if !self.seen.contains(k.as_str()) {
                issues.push(&join(&self.path, k), "unknown key");
            }
        }
    }
}

fn number_list(key: &str, v: &Value, issues: &mut Issues) -> Option<Vec<f64>> {
    let items: Vec<&Value> = match v {
        Value::Array(a) => a.iter().collect(),
        other => vec![other],
    };
    let out: Option<Vec<f64>> = items.iter().map(|x| x.as_f64().filter(|f| f.is_finite())).collect();
    if out.is_none() || items.is_empty() {
        issues.push(key, "must be a number or a nonempty array of numbers");
        return None;
    }
    out
}

fn matrix_spec(key: &str, v: &Value, issues: &mut Issues) -> Option<MatrixSpec> {
    if let Some(x) = v.as_f64() {
        return Some(MatrixSpec::Scalar(x));
    }
    let rows = v.as_array().and_then(|rows| {
        rows.iter()
            .map(|r| r.as_array().and_then(|r| r.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>()))
            .collect::<Option<Vec<Vec<f64>>>>()
    });
    match rows {
        Some(r) if !r.is_empty() && r.iter().all(|row| row.len() == r.len()) => Some(MatrixSpec::Rows(r)),
        _ => {
            issues.push(key, "must be a number or a square array of rows");
            None
        }
    }
}

fn kernel_spec(key: &str, v: &Value, issues: &mut Issues) -> Option<KernelSpec> {
    let mut obj = Obj::new(key, v, issues)?;
    let form = obj.str("form", issues);
    let params_key = obj.key("params");
    let params = obj.get("params");
    obj.finish(issues);
    let Some(form) = form else {
        issues.push(&join(key, "form"), "is required (exponential | power_law | grid)");
        return None;
    };
    let Some(params) = params else {
        issues.push(&params_key, "is required");
        return None;
    };
    let mut p = Obj::new(&params_key, params, issues)?;
    let matrix = |p: &mut Obj, name: &str, issues: &mut Issues| -> Option<MatrixSpec> {
        let k = p.key(name);
        match p.get(name) {
            Some(v) => matrix_spec(&k, v, issues),
            None => {
                issues.push(&k, "is required");
                None
            }
        }
    };
    let spec = match form {
        "exponential" => {
            let alpha = matrix(&mut p, "alpha", issues);
            let beta = matrix(&mut p, "beta", issues);
            Some(KernelSpec::Exponential { alpha: alpha?, beta: beta? })
        }
        "power_law" => {
            let scale = matrix(&mut p, "scale", issues);
            let exponent = p.required_f64("exponent", issues);
            let cutoff = p.required_f64("cutoff", issues);
            if let Some(c) = cutoff {
                if !(c > 0.0) {
                    issues.push(&p.key("cutoff"), format!("must be > 0, got {c}"));
                }
            }
            Some(KernelSpec::PowerLaw { scale: scale?, exponent: exponent?, cutoff: cutoff? })
        }
        "grid" => {
            let step = p.required_f64("step", issues);
            let values_key = p.key("values");
            let values = match p.get("values") {
                Some(Value::Array(items)) if !items.is_empty() => items
                    .iter()
                    .enumerate()
                    .map(|(i, v)| matrix_spec(&format!("{values_key}[{i}]"), v, issues))
                    .collect::<Option<Vec<_>>>(),
                _ => {
                    issues.push(&values_key, "must be a nonempty array");
                    None
                }
            };
            Some(KernelSpec::Grid { step: step?, values: values? })
        }
        other => {
            issues.push(&join(key, "form"), format!("unknown kernel form {other:?} (exponential | power_law | grid)"));
            None
        }
    };
    if spec.is_some() {
        p.finish(issues);
    }
    let spec = spec?;
    if let Err(e) = spec.build() {
        issues.push(key, format!("invalid kernel: {e}"));
        return None;
    }
    Some(spec)
}

fn schedule(key: &str, v: &Value, issues: &mut Issues) -> Option<BSchedule> {
    let mut obj = Obj::new(key, v, issues)?;
    let kind = obj.str("kind", issues);
    let scale = obj.f64("scale", issues).unwrap_or(1.0);
    let exponent = obj.f64("exponent", issues);
    obj.finish(issues);
    if !(scale > 0.0) {
        issues.push(&join(key, "scale"), format!("must be > 0, got {scale}"));
    }
    match kind {
        Some("linear") => {
            if exponent.is_some() {
                issues.push(&join(key, "exponent"), "only applies to the power schedule");
            }
            Some(BSchedule::Linear { scale })
        }
        Some("power") => match exponent {
            Some(e) if e > 0.0 => Some(BSchedule::Power { scale, exponent: e }),
            Some(e) => {
                issues.push(&join(key, "exponent"), format!("must be > 0, got {e}"));
                None
            }
            None => {
                issues.push(&join(key, "exponent"), "is required for the power schedule");
                None
            }
        },
        Some(other) => {
            issues.push(&join(key, "kind"), format!("unknown schedule {other:?} (linear | power)"));
            None
        }
        None => {
            issues.push(&join(key, "kind"), "is required (linear | power)");
            None
        }
    }
}

fn family(v: &Value, issues: &mut Issues) -> Option<FamilyConfig> {
    let mut obj = Obj::new("family", v, issues)?;
    let base = match obj.get("base") {
        Some(b) => kernel_spec("family.base", b, issues),
        None => {
            issues.push("family.base", "is required");
            None
        }
    };
    let c = obj.f64("c", issues).unwrap_or(1.0);
    let sched = match obj.get("schedule") {
        Some(s) => schedule("family.schedule", s, issues),
        None => Some(BSchedule::default()),
    };
    let gap = obj.f64("gap_exponent", issues).unwrap_or(1.0);
    let a = obj.f64_list("a", issues).unwrap_or_else(|| vec![1.0]);
    let n = obj.u64_list("n", issues);
    obj.finish(issues);
    if !(c > 0.0) {
        issues.push("family.c", format!("must be > 0, got {c}"));
    }
    if !(gap > 0.0 && gap <= 1.0) {
        issues.push("family.gap_exponent", format!("must lie in (0, 1], got {gap}"));
    }
    if a.iter().any(|x| *x < 0.0) {
        issues.push("family.a", "must be nonnegative");
    }
    if let Some(ns) = &n {
        if ns.iter().any(|k| *k == 0) {
            issues.push("family.n", "indices must be >= 1");
        }
    }
    Some(FamilyConfig { base: base?, c, schedule: sched?, gap_exponent: gap, a, n: n.unwrap_or_default() })
}

fn meanfield(v: &Value, issues: &mut Issues) -> Option<MeanFieldConfig> {
    let mut obj = Obj::new("meanfield", v, issues)?;
    let n = obj.u64_list("n", issues);
    let k = obj.u64("K", issues).unwrap_or(0);
    let mu0 = obj.f64("mu0", issues);
    let beta = obj.f64("beta", issues);
    let coupled = obj.bool("coupled", issues).unwrap_or(false);
    obj.finish(issues);
    if n.is_none() && !obj_has(v, "n") {
        issues.push("meanfield.n", "is required (particle count or list)");
    }
    if let Some(ns) = &n {
        if ns.iter().any(|x| *x == 0) {
            issues.push("meanfield.n", "particle counts must be >= 1");
        }
        if let Some(small) = ns.iter().find(|x| (**x as usize) < k as usize) {
            issues.push(
                "meanfield.K",
                format!("tagged count meanfield.K = {k} exceeds particle count meanfield.n = {small}"),
            );
        }
    }
    if let Some(m) = mu0 {
        if m < 0.0 {
            issues.push("meanfield.mu0", format!("must be >= 0, got {m}"));
        }
    }
    if let Some(b) = beta {
        if !(b > 0.0) {
            issues.push("meanfield.beta", format!("must be > 0, got {b}"));
        }
    }
    Some(MeanFieldConfig { n: n?.into_iter().map(|x| x as usize).collect(), k: k as usize, mu0, beta, coupled })
}

fn obj_has(v: &Value, k: &str) -> bool {
    v.as_object().is_some_and(|m| m.contains_key(k))
}

fn limit(v: &Value, issues: &mut Issues) -> Option<LimitConfig> {
    let mut obj = Obj::new("limit", v, issues)?;
    let a = obj.f64_list("a", issues).unwrap_or_else(|| vec![1.0]);
    let mut sources = Vec::new();
    if let Some(t) = obj.get("triplet") {
        sources.push(Obj::new("limit.triplet", t, issues).and_then(|mut o| {
            let m = o.required_f64("m", issues);
            let lambda = o.required_f64("lambda", issues);
            let alpha = o.f64("alpha", issues).unwrap_or(1.0);
            o.finish(issues);
            if !(alpha > 0.0 && alpha <= 1.0) {
                issues.push("limit.triplet.alpha", format!("must lie in (0, 1], got {alpha}"));
            }
            if let Some(l) = lambda {
                if !(l > 0.0) {
                    issues.push("limit.triplet.lambda", format!("must be > 0, got {l}"));
                }
            }
            if let Some(m) = m {
                if m < 0.0 {
                    issues.push("limit.triplet.m", format!("must be >= 0, got {m}"));
                }
            }
            Some(LimitSource::Triplet { m: m?, lambda: lambda?, alpha })
        }));
    }
    if let Some(f) = obj.get("fractional") {
        sources.push(Obj::new("limit.fractional", f, issues).and_then(|mut o| {
            let alpha = o.required_f64("alpha", issues);
            let norm = match o.str("normalization", issues) {
                None | Some("gamma_one_minus_alpha") => Some(FractionalNormalization::GammaOneMinusAlpha),
                Some("gamma_alpha") => Some(FractionalNormalization::GammaAlpha),
                Some(other) => {
                    issues.push(
                        "limit.fractional.normalization",
                        format!("unknown normalization {other:?} (gamma_one_minus_alpha | gamma_alpha)"),
                    );
                    None
                }
            };
            o.finish(issues);
            if let Some(al) = alpha {
                if !(al > 0.5 && al < 1.0) {
                    issues.push("limit.fractional.alpha", format!("must lie in (0.5, 1), got {al}"));
                }
            }
            Some(LimitSource::Fractional { alpha: alpha?, normalization: norm? })
        }));
    }
    if let Some(c) = obj.get("cir") {
        sources.push(Obj::new("limit.cir", c, issues).and_then(|mut o| {
            let b = o.required_f64("b", issues);
            let level = o.required_f64("a", issues);
            let sigma = o.required_f64("sigma", issues);
            let xi0 = o.f64("xi0", issues).unwrap_or(0.0);
            o.finish(issues);
            for (name, v) in [("b", b), ("a", level), ("sigma", sigma)] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        issues.push(&format!("limit.cir.{name}"), format!("must be > 0, got {v}"));
                    }
                }
            }
            if xi0 < 0.0 {
                issues.push("limit.cir.xi0", format!("must be >= 0, got {xi0}"));
            }
            Some(LimitSource::Cir { b: b?, a: level?, sigma: sigma?, xi0 })
        }));
    }
    obj.finish(issues);
    if a.iter().any(|x| *x < 0.0) {
        issues.push("limit.a", "must be nonnegative");
    }
    match sources.len() {
        0 => {
            issues.push("limit", "needs exactly one of triplet, fractional, cir");
            None
        }
        1 => Some(LimitConfig { source: sources.pop().flatten()?, a }),
        _ => {
            issues.push("limit", "needs exactly one of triplet, fractional, cir");
            None
        }
    }
}

fn regime(v: &Value, issues: &mut Issues) -> Option<Regime> {
    let mut obj = Obj::new("regime", v, issues)?;
    let kind = obj.str("kind", issues);
    let zeta = obj.f64("zeta", issues);
    obj.finish(issues);
    match (kind, zeta) {
        (Some("zero"), None) => Some(Regime::Zero),
        (Some("infinite"), None) => Some(Regime::Infinite),
        (Some("finite"), Some(z)) if z > 0.0 => Some(Regime::Finite(z)),
        (Some("finite"), Some(z)) => {
            issues.push("regime.zeta", format!("must be > 0, got {z}"));
            None
        }
        (Some("finite"), None) => {
            issues.push("regime.zeta", "is required for the finite regime");
            None
        }
        (Some("zero" | "infinite"), Some(_)) => {
            issues.push("regime.zeta", "only applies to the finite regime");
            None
        }
        (Some(other), _) => {
            issues.push("regime.kind", format!("unknown regime {other:?} (zero | finite | infinite)"));
            None
        }
        (None, _) => {
            issues.push("regime.kind", "is required (zero | finite | infinite)");
            None
        }
    }
}

/// Parses and validates a configuration document, applying defaults.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut issues = Issues::default();
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigIssue { key: "<document>".into(), message: format!("not valid JSON: {e}") }])
    })?;
    let Some(mut root) = Obj::new("", &doc, &mut issues) else {
        return Err(ConfigErrors(issues.0));
    };
    let kind = match root.str("kind", &mut issues) {
        Some(s) => {
            let k = Kind::parse(s);
            if k.is_none() {
                issues.push(
                    "kind",
                    format!("unknown kind {s:?} (resolvent | hawkes | meanfield | limit | regime-compare | acceptance-suite)"),
                );
            }
            k
        }
        None => {
            if !doc.as_object().is_some_and(|m| m.contains_key("kind")) {
                issues.push("kind", "is required");
            }
            None
        }
    };
    let seed = root.u64("seed", &mut issues);
    if seed.is_none() && !obj_has(&doc, "seed") {
        issues.push("seed", "is required (64-bit unsigned integer)");
    }
    let grid = match root.get("grid") {
        Some(g) => Obj::new("grid", g, &mut issues).map(|mut o| {
            let horizon = o.f64("T", &mut issues).unwrap_or(DEFAULT_HORIZON);
            let h = o.f64("h", &mut issues).unwrap_or(DEFAULT_STEP);
            o.finish(&mut issues);
            GridConfig { horizon, h }
        }),
        None => Some(GridConfig { horizon: DEFAULT_HORIZON, h: DEFAULT_STEP }),
    };
    if let Some(g) = grid {
        if !(g.h > 0.0) {
            issues.push("grid.h", format!("must be > 0, got {}", g.h));
        }
        if !(g.horizon > 0.0) {
            issues.push("grid.T", format!("must be > 0, got {}", g.horizon));
        }
        if g.h > 0.0 && g.horizon > 0.0 && g.h > g.horizon {
            issues.push("grid.h", format!("step {} exceeds horizon grid.T = {}", g.h, g.horizon));
        }
    }
    let paths = root.u64("paths", &mut issues).map(|p| p as usize).unwrap_or(DEFAULT_PATHS);
    if paths == 0 {
        issues.push("paths", "must be >= 1");
    }
    let output = root.str("output", &mut issues).map(PathBuf::from);

    let allowed: &[&str] = kind.map(Kind::keys).unwrap_or(&[]);
    fn take<'v>(root: &mut Obj<'v>, allowed: &[&str], key: &str) -> Option<&'v Value> {
        if allowed.contains(&key) {
            root.get(key)
        } else {
            None
        }
    }
    let kernel = take(&mut root, allowed, "kernel").and_then(|v| kernel_spec("kernel", v, &mut issues));
    let fam = take(&mut root, allowed, "family").and_then(|v| family(v, &mut issues));
    let baseline = take(&mut root, allowed, "baseline").and_then(|v| number_list("baseline", v, &mut issues));
    let method = match take(&mut root, allowed, "method").map(|v| v.as_str()) {
        None => Method::Thinning,
        Some(Some("thinning")) => Method::Thinning,
        Some(Some("cluster")) => Method::Cluster,
        Some(_) => {
            issues.push("method", "must be \"thinning\" or \"cluster\"");
            Method::Thinning
        }
    };
    let z = take(&mut root, allowed, "z").and_then(|v| number_list("z", v, &mut issues)).unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    if z.iter().any(|v| !(*v > 0.0)) {
        issues.push("z", "Laplace arguments must be > 0");
    }
    let mf = take(&mut root, allowed, "meanfield").and_then(|v| meanfield(v, &mut issues));
    let lim = take(&mut root, allowed, "limit").and_then(|v| limit(v, &mut issues));
    let reg = take(&mut root, allowed, "regime").and_then(|v| regime(v, &mut issues));
    let criteria = match take(&mut root, allowed, "criteria") {
        None => Vec::new(),
        Some(v) => {
            let ids: Option<Vec<u8>> =
                v.as_array().and_then(|a| a.iter().map(|x| x.as_u64().and_then(|n| u8::try_from(n).ok())).collect());
            match ids {
                Some(ids) if ids.iter().all(|i| (1..=crate::acceptance::CRITERIA).contains(i)) => ids,
                _ => {
                    issues.push("criteria", format!("must be an array of criterion ids in 1..={}", crate::acceptance::CRITERIA));
                    Vec::new()
                }
            }
        }
    };
    if kind.is_some() {
        root.finish(&mut issues);
    } else {
        // without a kind only the common keys can be judged
        for k in doc.as_object().into_iter().flat_map(|m| m.keys()) {
            if !COMMON_KEYS.contains(&k.as_str()) && !["kernel", "family", "baseline", "method", "z", "meanfield", "limit", "regime", "criteria"].contains(&k.as_str()) {
                issues.push(k, "unknown key");
            }
        }
    }

    // cross-key constraints
    if let Some(kind) = kind {
        let needs_kernel = matches!(kind, Kind::Resolvent | Kind::Hawkes | Kind::Meanfield);
        if needs_kernel && kernel.is_none() && fam.is_none() && !obj_has(&doc, "kernel") && !obj_has(&doc, "family") {
            issues.push("kernel", format!("is required for kind {} (or give family)", kind.name()));
        }
        if needs_kernel && obj_has(&doc, "kernel") && obj_has(&doc, "family") {
            issues.push("family", "give either kernel or family, not both");
        }
        if kind == Kind::Meanfield && mf.is_none() && !obj_has(&doc, "meanfield") {
            issues.push("meanfield", "is required for kind meanfield");
        }
        if kind == Kind::Meanfield {
            if let (Some(m), None) = (&mf, &fam) {
                if m.mu0.is_none() {
                    issues.push("meanfield.mu0", "is required unless family is given");
                }
            }
            if let Some(k) = &kernel {
                if let Ok(kern) = k.build() {
                    if kern.dim() != 1 {
                        issues.push("kernel", "mean-field interaction kernel must be univariate");
                    }
                }
            }
        }
        if kind == Kind::Hawkes {
            if let (Some(k), Some(b)) = (&kernel, &baseline) {
                if let Ok(kern) = k.build() {
                    if b.len() != 1 && b.len() != kern.dim() {
                        issues.push("baseline", format!("has {} entries but the kernel dimension is {}", b.len(), kern.dim()));
                    }
                }
            }
            if baseline.as_ref().is_some_and(|b| b.iter().any(|v| *v < 0.0)) {
                issues.push("baseline", "must be nonnegative");
            }
        }
        if matches!(kind, Kind::Limit | Kind::RegimeCompare) && lim.is_none() && !obj_has(&doc, "limit") {
            issues.push("limit", format!("is required for kind {}", kind.name()));
        }
        if kind == Kind::RegimeCompare {
            if reg.is_none() && !obj_has(&doc, "regime") {
                issues.push("regime", "is required for kind regime-compare");
            }
            if fam.is_some() != mf.is_some() {
                issues.push("meanfield", "regime-compare simulation needs both family and meanfield");
            }
            if let Some(l) = &lim {
                if matches!(l.source, LimitSource::Cir { .. }) {
                    issues.push("limit.cir", "regime-compare drives particles with an SVE limit (triplet or fractional)");
                }
            }
        }
        if let Some(f) = &fam {
            let indexed_by_particles = matches!(kind, Kind::Meanfield | Kind::RegimeCompare);
            if indexed_by_particles && !f.n.is_empty() {
                issues.push("family.n", "particle systems index the family by meanfield.n; drop family.n");
            }
            if !indexed_by_particles && f.n.is_empty() {
                issues.push("family.n", "is required (one index or a list)");
            }
        }
        if kind == Kind::Hawkes && obj_has(&doc, "family") && obj_has(&doc, "baseline") {
            issues.push("baseline", "is not used with family (the baseline is a / beta_n)");
        }
        if let Some(l) = &lim {
            if l.a.len() != 1 {
                issues.push("limit.a", "limit kernels are univariate; give a single level");
            }
        }
        if kind == Kind::Resolvent {
            if let Some(f) = &fam {
                if f.a.len() != 1 {
                    if let Ok(b) = f.base.build() {
                        if f.a.len() != b.dim() {
                            issues.push("family.a", format!("has {} entries but the kernel dimension is {}", f.a.len(), b.dim()));
                        }
                    }
                }
            }
        }
    }

    if !issues.0.is_empty() {
        return Err(ConfigErrors(issues.0));
    }
    let kind = kind.expect("reported above");
    Ok(ExperimentConfig {
        kind,
        seed: seed.expect("reported above"),
        grid: grid.expect("reported above"),
        paths,
        output: output.unwrap_or_else(|| PathBuf::from("runs").join(kind.name())),
        kernel,
        family: fam,
        baseline: baseline.unwrap_or_else(|| vec![1.0]),
        method,
        z,
        meanfield: mf,
        limit: lim,
        regime: reg,
        criteria,
    })
}
