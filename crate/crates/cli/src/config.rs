//! Run configuration: a TOML file plus `--set key=value` overrides, resolved
//! against per-problem defaults and validated before anything runs.

use std::path::{Path, PathBuf};

use dpi::problems::{GmmComponent, GmmSpec};
use dpi::{DpiConfig, InitialLaw, Problem, SdeKind, SdeModel};
use serde::{Deserialize, Serialize};

/// A configuration problem, reported with the key path it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[default]
    Burgers,
    HjbGmm,
    GBrownian,
    HeatOracle,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Burgers => "burgers",
            ProblemKind::HjbGmm => "hjb_gmm",
            ProblemKind::GBrownian => "g_brownian",
            ProblemKind::HeatOracle => "heat_oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeName {
    Brownian,
    GeometricBrownian,
    OrnsteinUhlenbeck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiName {
    Point,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreName {
    Exact,
    Checkpoint,
}

/// Terminal function for the variance sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTerminal {
    /// The configured problem's `g`.
    Problem,
    /// `g = 1`.
    Constant,
    /// `g(x) = sum_i x_i / sqrt(d)`.
    Linear,
}

/// A scalar is broadcast to every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl VectorSpec {
    fn expand(&self, d: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            VectorSpec::Scalar(v) => Ok(vec![*v; d]),
            VectorSpec::Vector(v) if v.len() == d => Ok(v.clone()),
            VectorSpec::Vector(v) => err(format!("{key} has {} entries, problem.d is {d}", v.len())),
        }
    }
}

// Raw file layout. Every field is optional so that defaults can depend on
// the chosen problem.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    gmm: RawGmm,
    #[serde(default)]
    sde: RawSde,
    #[serde(default)]
    xi: RawXi,
    #[serde(default)]
    dpi: RawDpi,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    variance: RawVariance,
    #[serde(default)]
    fk_check: RawFkCheck,
    #[serde(default)]
    sample: RawSample,
    #[serde(default)]
    eval: RawEval,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: Option<ProblemKind>,
    d: Option<usize>,
    horizon: Option<f64>,
    kappa: Option<f64>,
    sigma: Option<f64>,
    #[serde(alias = "J")]
    j: Option<usize>,
    solution_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGmm {
    components: Option<usize>,
    mean_range: Option<f64>,
    variance_scale: Option<f64>,
    seed: Option<u64>,
    weights: Option<Vec<f64>>,
    means: Option<Vec<Vec<f64>>>,
    variance_scales: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSde {
    kind: Option<SdeName>,
    theta: Option<f64>,
    scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawXi {
    kind: Option<XiName>,
    mean: Option<VectorSpec>,
    variance_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDpi {
    #[serde(alias = "K")]
    k: Option<usize>,
    #[serde(alias = "M")]
    m: Option<usize>,
    #[serde(alias = "N")]
    n: Option<usize>,
    #[serde(alias = "E")]
    epochs: Option<usize>,
    lambda: Option<f64>,
    lr: Option<f64>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    widths: Option<Vec<usize>>,
    eval_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariance {
    epsilons: Option<Vec<f64>>,
    #[serde(alias = "M")]
    m: Option<usize>,
    x: Option<VectorSpec>,
    terminal: Option<SweepTerminal>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFkCheck {
    points: Option<usize>,
    #[serde(alias = "M")]
    m: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    score_source: Option<ScoreName>,
    checkpoint: Option<PathBuf>,
    n_samples: Option<usize>,
    steps: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    checkpoint: Option<PathBuf>,
    points: Option<usize>,
}

// Resolved configuration.

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    pub d: usize,
    pub horizon: f64,
    pub kappa: f64,
    pub sigma: f64,
    #[serde(rename = "J")]
    pub j: usize,
    pub solution_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdeSection {
    pub kind: SdeName,
    pub theta: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiSection {
    pub kind: XiName,
    pub mean: Vec<f64>,
    pub variance_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceSection {
    pub epsilons: Vec<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub x: Vec<f64>,
    pub terminal: SweepTerminal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkCheckSection {
    pub points: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSection {
    pub score_source: ScoreName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub n_samples: usize,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub points: usize,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: ProblemSection,
    /// Present only for `hjb_gmm`. Echoed as explicit components.
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "echo_gmm")]
    pub gmm: Option<GmmSpec>,
    pub sde: SdeSection,
    pub xi: XiSection,
    pub dpi: DpiConfig,
    /// Where artifacts go. Not part of the echo: it does not affect results.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub variance: VarianceSection,
    pub fk_check: FkCheckSection,
    pub sample: SampleSection,
    pub eval: EvalSection,
}

fn echo_gmm<S: serde::Serializer>(spec: &Option<GmmSpec>, s: S) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Explicit {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variance_scales: Vec<f64>,
    }
    let c = &spec.as_ref().expect("skipped when absent").components;
    Explicit {
        weights: c.iter().map(|c| c.weight).collect(),
        means: c.iter().map(|c| c.mean.clone()).collect(),
        variance_scales: c.iter().map(|c| c.variance_scale).collect(),
    }
    .serialize(s)
}

/// Reads `path` (if any), applies `overrides` in order and resolves.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let raw: Raw = serde_path_to_error::deserialize(toml::Value::Table(table))
        .map_err(|e| ConfigError(format!("{}: {}", e.path(), e.inner().message())))?;
    resolve(raw)
}

/// `a.b.c=value`. The value is read as TOML, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let Some((key, value)) = spec.split_once('=') else {
        return err(format!("override `{spec}` is not of the form key=value"));
    };
    let key = key.trim();
    let value = value.trim();
    let parsed = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(value.to_owned()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return err(format!("override key `{key}` is malformed"));
    }
    let (last, parents) = parts.split_last().expect("nonempty split");
    let mut cur = table;
    for (i, p) in parents.iter().enumerate() {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return err(format!("{} is not a section", parts[..=i].join("."))),
        };
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        err(format!("{key} must be > 0, got {v}"))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        err(format!("{key} must be >= 1"))
    }
}

fn resolve(raw: Raw) -> Result<RunConfig, ConfigError> {
    let kind = raw.problem.kind.unwrap_or_default();
    let d = at_least_one("problem.d", raw.problem.d.unwrap_or(10))?;
    let problem = ProblemSection {
        kind,
        d,
        horizon: positive("problem.horizon", raw.problem.horizon.unwrap_or(1.0))?,
        kappa: positive("problem.kappa", raw.problem.kappa.unwrap_or(1.0))?,
        sigma: positive("problem.sigma", raw.problem.sigma.unwrap_or(1.0))?,
        j: at_least_one("problem.J", raw.problem.j.unwrap_or(2))?,
        solution_seed: raw.problem.solution_seed.unwrap_or(0),
    };

    let gmm = match kind {
        ProblemKind::HjbGmm => Some(resolve_gmm(&raw.gmm, d)?),
        _ => None,
    };

    let sde = match raw.sde.kind {
        Some(name) => SdeSection {
            kind: name,
            theta: positive("sde.theta", raw.sde.theta.unwrap_or(1.0))?,
            scale: positive("sde.scale", raw.sde.scale.unwrap_or(1.0))?,
        },
        // The problem's own forward process.
        None => SdeSection {
            kind: SdeName::Brownian,
            theta: 1.0,
            scale: if kind == ProblemKind::Burgers { problem.sigma } else { 1.0 },
        },
    };

    let default_xi = if kind == ProblemKind::HjbGmm { XiName::Gaussian } else { XiName::Point };
    let xi_kind = raw.xi.kind.unwrap_or(default_xi);
    let xi = XiSection {
        kind: xi_kind,
        mean: raw.xi.mean.unwrap_or(VectorSpec::Scalar(0.0)).expand(d, "xi.mean")?,
        variance_scale: positive(
            "xi.variance_scale",
            raw.xi.variance_scale.unwrap_or(if kind == ProblemKind::HjbGmm { 4.0 } else { 1.0 }),
        )?,
    };

    let mut dpi = DpiConfig::defaults_for(kind.name());
    let r = raw.dpi;
    dpi.k = r.k.unwrap_or(dpi.k);
    dpi.m = r.m.unwrap_or(dpi.m);
    dpi.n = r.n.unwrap_or(dpi.n);
    dpi.epochs = r.epochs.unwrap_or(dpi.epochs);
    dpi.lambda = r.lambda.unwrap_or(dpi.lambda);
    dpi.lr = r.lr.unwrap_or(dpi.lr);
    dpi.batch_size = r.batch_size.unwrap_or(dpi.batch_size);
    dpi.seed = r.seed.unwrap_or(dpi.seed);
    dpi.widths = r.widths.unwrap_or(dpi.widths);
    dpi.eval_points = r.eval_points.unwrap_or(dpi.eval_points);
    dpi.validate().map_err(|e| ConfigError(strip_prefix(e.to_string())))?;

    let epsilons = raw.variance.epsilons.unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3]);
    if epsilons.is_empty() {
        return err("variance.epsilons must not be empty");
    }
    for e in &epsilons {
        if !(*e > 0.0 && *e < problem.horizon) {
            return err(format!("variance.epsilons entry {e} is outside (0, problem.horizon)"));
        }
    }
    let variance = VarianceSection {
        epsilons,
        m: at_least_one("variance.M", raw.variance.m.unwrap_or(100_000))?,
        x: raw.variance.x.unwrap_or(VectorSpec::Scalar(0.0)).expand(d, "variance.x")?,
        terminal: raw.variance.terminal.unwrap_or(SweepTerminal::Problem),
    };

    let fk_check = FkCheckSection {
        points: at_least_one("fk_check.points", raw.fk_check.points.unwrap_or(200))?,
        m: at_least_one("fk_check.M", raw.fk_check.m.unwrap_or(4096))?,
    };

    let score_source = raw.sample.score_source.unwrap_or(ScoreName::Exact);
    if score_source == ScoreName::Checkpoint && raw.sample.checkpoint.is_none() {
        return err("sample.checkpoint is required when sample.score_source = \"checkpoint\"");
    }
    let sample = SampleSection {
        score_source,
        checkpoint: raw.sample.checkpoint,
        n_samples: at_least_one("sample.n_samples", raw.sample.n_samples.unwrap_or(10_000))?,
        steps: at_least_one("sample.steps", raw.sample.steps.unwrap_or(100))?,
        seed: raw.sample.seed.unwrap_or(dpi.seed),
    };

    let eval = EvalSection {
        checkpoint: raw.eval.checkpoint,
        points: at_least_one("eval.points", raw.eval.points.unwrap_or(dpi.eval_points))?,
    };

    let cfg = RunConfig {
        problem,
        gmm,
        sde,
        xi,
        dpi,
        output_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("dpi-out")),
        variance,
        fk_check,
        sample,
        eval,
    };
    // Surface construction errors (bad GMM, bad dimensions) now.
    cfg.build_problem()?;
    cfg.data_model()?;
    Ok(cfg)
}

fn strip_prefix(s: String) -> String {
    s.strip_prefix("configuration error: ").map(str::to_owned).unwrap_or(s)
}

fn resolve_gmm(raw: &RawGmm, d: usize) -> Result<GmmSpec, ConfigError> {
    let spec = match (&raw.weights, &raw.means, &raw.variance_scales) {
        (None, None, None) => GmmSpec::random(
            d,
            at_least_one("gmm.components", raw.components.unwrap_or(3))?,
            positive("gmm.mean_range", raw.mean_range.unwrap_or(2.0))?,
            positive("gmm.variance_scale", raw.variance_scale.unwrap_or(1.0))?,
            raw.seed.unwrap_or(0),
        ),
        (Some(w), Some(m), Some(v)) => {
            if w.len() != m.len() || w.len() != v.len() {
                return err("gmm.weights, gmm.means and gmm.variance_scales must have equal lengths");
            }
            if raw.components.is_some() || raw.mean_range.is_some() || raw.variance_scale.is_some() || raw.seed.is_some() {
                return err("gmm: give either explicit weights/means/variance_scales or random-draw keys, not both");
            }
            GmmSpec {
                components: w
                    .iter()
                    .zip(m)
                    .zip(v)
                    .map(|((&weight, mean), &variance_scale)| GmmComponent {
                        weight,
                        mean: mean.clone(),
                        variance_scale,
                    })
                    .collect(),
            }
        }
        _ => return err("gmm.weights, gmm.means and gmm.variance_scales must be given together"),
    };
    spec.validate(d).map_err(|e| ConfigError(format!("gmm: {}", strip_prefix(e.to_string()))))?;
    Ok(spec)
}

impl RunConfig {
    pub fn build_problem(&self) -> Result<Problem, ConfigError> {
        let p = &self.problem;
        let built = match p.kind {
            ProblemKind::Burgers => Problem::burgers(p.d, p.kappa, p.sigma, p.horizon),
            ProblemKind::HjbGmm => Problem::hjb_gmm(p.d, p.horizon, self.gmm.clone().expect("resolved with the problem")),
            ProblemKind::GBrownian => Problem::g_brownian(p.d, p.j, p.horizon, p.solution_seed),
            ProblemKind::HeatOracle => Problem::heat_oracle(p.d, p.horizon),
        };
        built.map_err(|e| ConfigError(format!("problem: {}", strip_prefix(e.to_string()))))
    }

    /// Process that generates the training inputs.
    pub fn data_model(&self) -> Result<SdeModel, ConfigError> {
        let kind = match self.sde.kind {
            SdeName::Brownian => SdeKind::BrownianMotion { scale: self.sde.scale },
            SdeName::GeometricBrownian => SdeKind::GeometricBrownian,
            SdeName::OrnsteinUhlenbeck => SdeKind::OrnsteinUhlenbeck { theta: self.sde.theta },
        };
        SdeModel::new(kind, self.problem.d).map_err(|e| ConfigError(format!("sde: {}", strip_prefix(e.to_string()))))
    }

    pub fn law(&self) -> InitialLaw {
        match self.xi.kind {
            XiName::Point => InitialLaw::Point(self.xi.mean.clone()),
            XiName::Gaussian => InitialLaw::Gaussian {
                mean: self.xi.mean.clone(),
                variance_scale: self.xi.variance_scale,
            },
        }
    }

    /// The resolved configuration as TOML, embedded in every artifact.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(overrides: &[&str]) -> Result<RunConfig, ConfigError> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        parse_config(None, &o)
    }

    #[test]
    fn burgers_defaults() {
        let c = parse(&["problem.kind=burgers"]).unwrap();
        assert_eq!((c.dpi.k, c.dpi.m, c.dpi.n, c.dpi.epochs), (20, 4096, 4096, 16));
        assert_eq!((c.dpi.lr, c.dpi.batch_size), (1e-3, 512));
        assert_eq!(c.dpi.widths, vec![128; 4]);
        assert_eq!(c.law(), InitialLaw::Point(vec![0.0; 10]));
    }

    #[test]
    fn g_brownian_defaults() {
        let c = parse(&["problem.kind=g_brownian"]).unwrap();
        assert_eq!((c.dpi.k, c.dpi.m, c.dpi.n, c.dpi.epochs), (40, 128, 1024, 16));
    }

    #[test]
    fn hjb_defaults_to_wide_gaussian_data() {
        let c = parse(&["problem.kind=hjb_gmm", "problem.d=3"]).unwrap();
        assert_eq!(
            c.law(),
            InitialLaw::Gaussian {
                mean: vec![0.0; 3],
                variance_scale: 4.0
            }
        );
        assert_eq!(c.gmm.unwrap().components.len(), 3);
    }

    #[test]
    fn negative_lambda_is_rejected_with_its_key() {
        let e = parse(&["dpi.lambda=-1"]).unwrap_err();
        assert!(e.0.contains("dpi.lambda"), "{e}");
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let e = parse(&["dpi.lamda=1"]).unwrap_err();
        assert!(e.0.contains("dpi") && e.0.contains("lamda"), "{e}");
        let e = parse(&["bogus.x=1"]).unwrap_err();
        assert!(e.0.contains("bogus"), "{e}");
    }

    #[test]
    fn type_mismatch_names_its_path() {
        let e = parse(&["dpi.K=two"]).unwrap_err();
        assert!(e.0.starts_with("dpi.K"), "{e}");
    }

    #[test]
    fn uppercase_aliases_and_later_overrides_win() {
        let c = parse(&["dpi.K=3", "dpi.K=4", "dpi.M=5"]).unwrap();
        assert_eq!((c.dpi.k, c.dpi.m), (4, 5));
        // Both spellings at once are ambiguous.
        let e = parse(&["dpi.K=3", "dpi.k=4"]).unwrap_err();
        assert!(e.0.contains("duplicate"), "{e}");
    }

    #[test]
    fn vector_length_is_checked() {
        let e = parse(&["problem.d=3", "xi.mean=[1.0, 2.0]"]).unwrap_err();
        assert!(e.0.contains("xi.mean"), "{e}");
        let c = parse(&["problem.d=2", "xi.mean=[1.0, 2.0]"]).unwrap();
        assert_eq!(c.xi.mean, vec![1.0, 2.0]);
    }

    #[test]
    fn explicit_gmm() {
        let c = parse(&[
            "problem.kind=hjb_gmm",
            "problem.d=2",
            "gmm.weights=[1.0]",
            "gmm.means=[[0.5, -0.5]]",
            "gmm.variance_scales=[2.0]",
        ])
        .unwrap();
        assert_eq!(c.gmm.unwrap().components[0].mean, vec![0.5, -0.5]);
        assert!(parse(&["problem.kind=hjb_gmm", "gmm.weights=[1.0]"]).is_err());
    }

    #[test]
    fn checkpoint_source_needs_a_path() {
        assert!(parse(&["sample.score_source=checkpoint"]).is_err());
    }

    #[test]
    fn echo_is_stable_and_omits_the_output_dir() {
        let a = parse(&["output.dir=a"]).unwrap();
        let b = parse(&["output.dir=b"]).unwrap();
        assert_eq!(a.echo(), b.echo());
        assert!(a.echo().contains("[dpi]"));
    }

    #[test]
    fn echo_parses_back_to_the_same_config() {
        for kind in ["burgers", "hjb_gmm", "g_brownian", "heat_oracle"] {
            let c = parse(&[&format!("problem.kind={kind}"), "problem.d=3", "dpi.seed=5"]).unwrap();
            let dir = std::env::temp_dir().join(format!("dpi-echo-{kind}-{}", std::process::id()));
            std::fs::write(&dir, c.echo()).unwrap();
            let back = parse_config(Some(&dir), &[]).unwrap();
            std::fs::remove_file(&dir).unwrap();
            assert_eq!(back, RunConfig { output_dir: back.output_dir.clone(), ..c });
        }
    }

    #[test]
    fn malformed_overrides() {
        assert!(parse(&["dpi.K"]).is_err());
        assert!(parse(&["dpi..K=1"]).is_err());
        assert!(parse(&["problem.kind.x=1"]).is_err());
    }
}
