//! Flat dotted-key run configuration: `key = value` lines, '#' comments.
//! Every key is validated with a field-specific message; unknown and
//! duplicated keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use bcslab_core::gap::{SeedMode, SolverOptions};
use bcslab_core::potential::{load_table, PotentialSpec};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

const KNOWN_KEYS: &[&str] = &[
    "mu",
    "temperature",
    "potential.model",
    "potential.depth",
    "potential.width",
    "potential.radius",
    "potential.lambda1",
    "potential.sigma1",
    "potential.lambda2",
    "potential.sigma2",
    "potential.table",
    "potential.lambda_scale",
    "grid.n_per_panel",
    "grid.p_max",
    "grid.grading_levels",
    "solver.damping",
    "solver.tol",
    "solver.max_iter",
    "solver.seed_mode",
    "criterion.ell_max",
    "tc.rel_tol",
    "tc.t_floor",
    "tc.upper_bracket",
    "sweep.lambdas",
    "output.dir",
    "output.format",
];

/// Which kinds of files a subcommand writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

/// Fully validated run configuration with defaults applied.
#[derive(Debug)]
pub struct RunConfig {
    pub mu: f64,
    /// None = not configured; Some(0.0) = the distinguished T = 0.
    pub temperature: Option<f64>,
    pub potential: PotentialSpec,
    pub n_per_panel: usize,
    pub p_max: f64,
    pub grading_levels: usize,
    pub solver: SolverOptions,
    pub ell_max: usize,
    pub tc_rel_tol: f64,
    pub tc_t_floor: Option<f64>,
    pub tc_upper_bracket: Option<f64>,
    pub sweep_lambdas: Vec<f64>,
    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
    /// Resolved key/value pairs (defaults filled in), for provenance echo.
    resolved: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for (idx, line_raw) in text.lines().enumerate() {
        let line = match line_raw.find('#') {
            Some(p) => &line_raw[..p],
            None => line_raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected 'key = value', got {line:?}",
                idx + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError(format!("unknown key '{key}' (line {})", idx + 1)));
        }
        if raw.contains_key(&key) {
            return Err(ConfigError(format!("duplicate key '{key}' (line {})", idx + 1)));
        }
        raw.insert(key, value);
    }
    build(raw)
}

fn build(raw: BTreeMap<String, String>) -> Result<RunConfig> {
    let get = |k: &str| raw.get(k).map(|s| s.as_str());

    let mu = require_f64(&raw, "mu")?;
    if !mu.is_finite() {
        return Err(ConfigError("'mu' must be finite".into()));
    }

    let temperature = match get("temperature") {
        None => None,
        Some("zero") => Some(0.0),
        Some(s) => {
            let t = parse_f64("temperature", s)?;
            if !(t.is_finite() && t >= 0.0) {
                return Err(ConfigError(format!(
                    "'temperature' must be >= 0 or the word 'zero' (got {s})"
                )));
            }
            Some(t)
        }
    };

    let lambda_scale = opt_f64(&raw, "potential.lambda_scale")?.unwrap_or(1.0);
    if !lambda_scale.is_finite() {
        return Err(ConfigError("'potential.lambda_scale' must be finite".into()));
    }
    let model = get("potential.model")
        .ok_or_else(|| ConfigError("missing required key 'potential.model'".into()))?;
    let potential = match model {
        "gaussian" => {
            let depth = require_f64(&raw, "potential.depth")?;
            let width = require_positive(&raw, "potential.width")?;
            PotentialSpec::gaussian(depth, width)
        }
        "square_well" => {
            let depth = require_f64(&raw, "potential.depth")?;
            let radius = require_positive(&raw, "potential.radius")?;
            PotentialSpec::square_well(depth, radius)
        }
        "two_gaussian" => {
            let a1 = require_f64(&raw, "potential.lambda1")?;
            let s1 = require_positive(&raw, "potential.sigma1")?;
            let a2 = require_f64(&raw, "potential.lambda2")?;
            let s2 = require_positive(&raw, "potential.sigma2")?;
            PotentialSpec::two_gaussian(a1, s1, a2, s2)
        }
        "tabulated" => {
            let path = get("potential.table")
                .ok_or_else(|| ConfigError("missing required key 'potential.table'".into()))?;
            let p = Path::new(path);
            if !p.exists() {
                return Err(ConfigError(format!("potential.table: no such file '{path}'")));
            }
            load_table(p)
        }
        other => {
            return Err(ConfigError(format!(
                "potential.model '{other}' is not one of gaussian, square_well, two_gaussian, tabulated"
            )))
        }
    }
    .map_err(|e| ConfigError(format!("potential: {e}")))?
    .with_lambda_scale(lambda_scale)
    .map_err(|e| ConfigError(format!("potential: {e}")))?;

    let n_per_panel = opt_usize(&raw, "grid.n_per_panel")?.unwrap_or(16);
    if n_per_panel < 4 {
        return Err(ConfigError(format!(
            "'grid.n_per_panel' must be an integer >= 4 (got {n_per_panel})"
        )));
    }
    let p_max = match opt_f64(&raw, "grid.p_max")? {
        Some(p) if p > 0.0 && p.is_finite() => p,
        Some(p) => return Err(ConfigError(format!("'grid.p_max' must be > 0 (got {p})"))),
        None => bcslab_core::discretize::default_p_max(mu),
    };
    let grading_levels = opt_usize(&raw, "grid.grading_levels")?.unwrap_or(6);
    if grading_levels > 40 {
        return Err(ConfigError(format!(
            "'grid.grading_levels' must be in 0..=40 (got {grading_levels})"
        )));
    }

    let damping = opt_f64(&raw, "solver.damping")?.unwrap_or(0.5);
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(ConfigError(format!(
            "'solver.damping' must lie in (0, 1] (got {damping})"
        )));
    }
    let tol = opt_f64(&raw, "solver.tol")?.unwrap_or(1e-10);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(ConfigError(format!("'solver.tol' must lie in (0, 1) (got {tol})")));
    }
    let max_iter = opt_usize(&raw, "solver.max_iter")?.unwrap_or(20_000);
    if max_iter == 0 {
        return Err(ConfigError("'solver.max_iter' must be >= 1".into()));
    }
    let seed = match get("solver.seed_mode").unwrap_or("constant") {
        "constant" => SeedMode::Constant,
        "linear-mode" => SeedMode::LinearMode,
        other => {
            return Err(ConfigError(format!(
                "'solver.seed_mode' must be 'constant' or 'linear-mode' (got {other})"
            )))
        }
    };

    let ell_max = opt_usize(&raw, "criterion.ell_max")?.unwrap_or(4);
    if ell_max > 16 {
        return Err(ConfigError(format!(
            "'criterion.ell_max' must be in 0..=16 (got {ell_max})"
        )));
    }

    let tc_rel_tol = opt_f64(&raw, "tc.rel_tol")?.unwrap_or(1e-3);
    if !(tc_rel_tol > 1e-6 && tc_rel_tol < 1e-1) {
        return Err(ConfigError(format!(
            "'tc.rel_tol' must lie in (1e-6, 1e-1) (got {tc_rel_tol})"
        )));
    }
    let tc_t_floor = opt_f64(&raw, "tc.t_floor")?;
    if let Some(t) = tc_t_floor {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ConfigError(format!("'tc.t_floor' must be > 0 (got {t})")));
        }
    }
    let tc_upper_bracket = opt_f64(&raw, "tc.upper_bracket")?;
    if let Some(t) = tc_upper_bracket {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ConfigError(format!("'tc.upper_bracket' must be > 0 (got {t})")));
        }
    }

    let sweep_lambdas = match get("sweep.lambdas") {
        None => vec![0.6, 0.8, 1.0, 1.25, 1.5],
        Some(s) => {
            let mut out = Vec::new();
            for field in s.split(',') {
                let v = parse_f64("sweep.lambdas", field.trim())?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(ConfigError(format!(
                        "'sweep.lambdas' entries must be > 0 (got {v})"
                    )));
                }
                out.push(v);
            }
            if out.is_empty() {
                return Err(ConfigError("'sweep.lambdas' must not be empty".into()));
            }
            out
        }
    };

    let output_dir = PathBuf::from(get("output.dir").unwrap_or("."));
    let output_format = match get("output.format").unwrap_or("both") {
        "json" => OutputFormat::Json,
        "csv" => OutputFormat::Csv,
        "both" => OutputFormat::Both,
        other => {
            return Err(ConfigError(format!(
                "'output.format' must be json, csv or both (got {other})"
            )))
        }
    };

    // resolved echo: every effective setting, defaults included
    let mut resolved = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        resolved.insert(k.to_string(), v);
    };
    put("mu", fmt_f64(mu));
    if let Some(t) = temperature {
        put(
            "temperature",
            if t == 0.0 { "zero".into() } else { fmt_f64(t) },
        );
    }
    put("potential.model", model.to_string());
    for k in [
        "potential.depth",
        "potential.width",
        "potential.radius",
        "potential.lambda1",
        "potential.sigma1",
        "potential.lambda2",
        "potential.sigma2",
        "potential.table",
    ] {
        if let Some(v) = raw.get(k) {
            put(k, v.clone());
        }
    }
    put("potential.lambda_scale", fmt_f64(lambda_scale));
    put("grid.n_per_panel", n_per_panel.to_string());
    put("grid.p_max", fmt_f64(p_max));
    put("grid.grading_levels", grading_levels.to_string());
    put("solver.damping", fmt_f64(damping));
    put("solver.tol", fmt_f64(tol));
    put("solver.max_iter", max_iter.to_string());
    put(
        "solver.seed_mode",
        match seed {
            SeedMode::Constant => "constant".into(),
            SeedMode::LinearMode => "linear-mode".into(),
        },
    );
    put("criterion.ell_max", ell_max.to_string());
    put("tc.rel_tol", fmt_f64(tc_rel_tol));
    if let Some(t) = tc_t_floor {
        put("tc.t_floor", fmt_f64(t));
    }
    if let Some(t) = tc_upper_bracket {
        put("tc.upper_bracket", fmt_f64(t));
    }
    put(
        "sweep.lambdas",
        sweep_lambdas
            .iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(","),
    );
    put("output.dir", output_dir.display().to_string());
    put(
        "output.format",
        match output_format {
            OutputFormat::Json => "json".into(),
            OutputFormat::Csv => "csv".into(),
            OutputFormat::Both => "both".into(),
        },
    );

    Ok(RunConfig {
        mu,
        temperature,
        potential,
        n_per_panel,
        p_max,
        grading_levels,
        solver: SolverOptions {
            damping,
            tol,
            max_iter,
            seed,
        },
        ell_max,
        tc_rel_tol,
        tc_t_floor,
        tc_upper_bracket,
        sweep_lambdas,
        output_dir,
        output_format,
        resolved,
    })
}

/// 17-significant-digit float text, identical to the emission format.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| ConfigError(format!("'{key}' expects a number, got {s:?}")))
}

fn require_f64(raw: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    match raw.get(key) {
        Some(s) => parse_f64(key, s),
        None => Err(ConfigError(format!("missing required key '{key}'"))),
    }
}

fn require_positive(raw: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = require_f64(raw, key)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(ConfigError(format!("'{key}' must be > 0 (got {v})")));
    }
    Ok(v)
}

fn opt_f64(raw: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    raw.get(key).map(|s| parse_f64(key, s)).transpose()
}

fn opt_usize(raw: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    match raw.get(key) {
        None => Ok(None),
        Some(s) => match s.parse::<usize>() {
            Ok(v) => Ok(Some(v)),
            Err(_) => Err(ConfigError(format!(
                "'{key}' expects a non-negative integer, got {s:?}"
            ))),
        },
    }
}
