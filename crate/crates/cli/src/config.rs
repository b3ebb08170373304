//! Sweep configuration files.

use anyhow::{anyhow, bail, Result};
use rotcode::codes::{CodeParams, Family};
use rotcode::ec::Scheme;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Diagnostics,
    EcSweepNbar,
    EcSweepNoise,
    BreakEven,
    VerifyIdentities,
    Wigner,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Diagnostics => "diagnostics",
            Experiment::EcSweepNbar => "ec_sweep_nbar",
            Experiment::EcSweepNoise => "ec_sweep_noise",
            Experiment::BreakEven => "break_even",
            Experiment::VerifyIdentities => "verify_identities",
            Experiment::Wigner => "wigner",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    /// CSV path, relative to the config file's directory.
    pub output: PathBuf,
    pub workers: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub codes: CodesSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub ec: EcSection,
    #[serde(default)]
    pub break_even: BreakEvenSection,
    #[serde(default)]
    pub wigner: WignerSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodesSection {
    pub families: Vec<String>,
    pub orders: Vec<usize>,
    /// Family grid up to this mean photon number.
    pub nbar_max: Option<f64>,
    /// Mean photon number targets; overrides `nbar_max`.
    pub nbar: Option<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub k: Option<Vec<usize>>,
    pub s: Option<Vec<usize>>,
    /// Squeezing for the squeezed_cat family.
    pub squeeze_r: f64,
}

impl Default for CodesSection {
    fn default() -> Self {
        Self {
            families: vec!["binomial".into()],
            orders: vec![3],
            nbar_max: None,
            nbar: None,
            alpha: None,
            k: None,
            s: None,
            squeeze_r: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub kappa_t: Vec<f64>,
    /// κ_φ / κ
    pub ratio: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { kappa_t: vec![1e-3], ratio: 1.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcSection {
    /// phase, pretty_good, ideal or optimal
    pub schemes: Vec<String>,
    pub flavor: String,
    pub data_bins: Option<usize>,
    pub mid_bins: Option<usize>,
    pub mid_alpha: f64,
    /// Largest data dimension handed to the optimal recovery.
    pub optimal_max_dim: usize,
}

impl Default for EcSection {
    fn default() -> Self {
        Self {
            schemes: vec!["phase".into(), "pretty_good".into()],
            flavor: "knill".into(),
            data_bins: None,
            mid_bins: None,
            mid_alpha: rotcode::ec::DEFAULT_MID_ALPHA,
            optimal_max_dim: 64,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BreakEvenSection {
    pub nbar_max: f64,
    pub lo: f64,
    pub hi: f64,
    pub rel_tol: f64,
}

impl Default for BreakEvenSection {
    fn default() -> Self {
        Self { nbar_max: 16.0, lo: 3e-3, hi: 0.3, rel_tol: 0.05 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WignerSection {
    /// zero, one, plus or minus
    pub state: String,
    pub extent: f64,
    pub points: usize,
}

impl Default for WignerSection {
    fn default() -> Self {
        Self { state: "plus".into(), extent: 4.0, points: 41 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub dim: usize,
    pub orders: Vec<usize>,
    pub k_max: i64,
    pub theta: Vec<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { dim: 48, orders: vec![1, 2, 3, 4], k_max: 3, theta: vec![0.0, 0.3] }
    }
}

/// Scheme of an EC point; `Optimal` is the iterative recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeChoice {
    Fixed(Scheme),
    Optimal,
}

impl SchemeChoice {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "optimal" {
            Some(SchemeChoice::Optimal)
        } else {
            Scheme::parse(s).map(SchemeChoice::Fixed)
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeChoice::Fixed(s) => s.name(),
            SchemeChoice::Optimal => "optimal",
        }
    }
}

/// A parsed config together with its source, for line-numbered messages.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: SweepConfig,
    pub path: PathBuf,
    pub families: Vec<Family>,
    pub schemes: Vec<SchemeChoice>,
}

impl LoadedConfig {
    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.config.output)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

/// 1-based line of `key` inside `[section]` (top level for ""), or of the
/// section header when the key is absent.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = i + 1;
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return i + 1;
                }
            }
        }
    }
    header
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    parse(&text, path)
}

/// Parse and validate config text; `path` only labels messages and anchors
/// relative paths.
pub fn parse(text: &str, path: &Path) -> Result<LoadedConfig> {
    let config: SweepConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        match line {
            Some(l) => anyhow!("{}:{l}: {}", path.display(), e.message()),
            None => anyhow!("{}: {}", path.display(), e.message()),
        }
    })?;
    let fail = |section: &str, key: &str, msg: String| anyhow!("{}:{}: {msg}", path.display(), line_of(text, section, key));

    let c = &config.codes;
    if c.families.is_empty() {
        return Err(fail("codes", "families", "families must be nonempty".into()));
    }
    let mut families = Vec::new();
    for f in &c.families {
        match Family::parse(f) {
            Some(Family::Trivial | Family::Custom) | None => return Err(fail("codes", "families", format!("unknown code family '{f}'"))),
            Some(fam) => families.push(fam),
        }
    }
    if c.orders.is_empty() || c.orders.contains(&0) {
        return Err(fail("codes", "orders", "orders must be nonempty and positive".into()));
    }
    for (key, v) in [("nbar", &c.nbar), ("alpha", &c.alpha)] {
        if let Some(v) = v {
            if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(fail("codes", key, format!("{key} must be a nonempty list of positive numbers")));
            }
        }
    }
    for (key, v) in [("k", &c.k), ("s", &c.s)] {
        if let Some(v) = v {
            if v.is_empty() || v.contains(&0) {
                return Err(fail("codes", key, format!("{key} must be a nonempty list of positive integers")));
            }
        }
    }
    if let Some(m) = c.nbar_max {
        if !(m.is_finite() && m > 0.0) {
            return Err(fail("codes", "nbar_max", "nbar_max must be positive".into()));
        }
    }
    if !(c.squeeze_r.is_finite() && c.squeeze_r >= 0.0) {
        return Err(fail("codes", "squeeze_r", "squeeze_r must be nonnegative".into()));
    }

    let n = &config.noise;
    if n.kappa_t.is_empty() || n.kappa_t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(fail("noise", "kappa_t", "kappa_t must be a nonempty list of nonnegative numbers".into()));
    }
    if !(n.ratio.is_finite() && n.ratio >= 0.0) {
        return Err(fail("noise", "ratio", "ratio must be nonnegative".into()));
    }

    let e = &config.ec;
    if e.schemes.is_empty() {
        return Err(fail("ec", "schemes", "schemes must be nonempty".into()));
    }
    let mut schemes = Vec::new();
    for s in &e.schemes {
        schemes.push(SchemeChoice::parse(s).ok_or_else(|| fail("ec", "schemes", format!("unknown scheme '{s}'")))?);
    }
    if e.flavor != "knill" && e.flavor != "hybrid" {
        return Err(fail("ec", "flavor", format!("unknown flavor '{}'", e.flavor)));
    }
    for (key, b) in [("data_bins", e.data_bins), ("mid_bins", e.mid_bins)] {
        if b.is_some_and(|b| b < 2) {
            return Err(fail("ec", key, format!("{key} must be at least 2")));
        }
    }
    if !(e.mid_alpha.is_finite() && e.mid_alpha > 0.0) {
        return Err(fail("ec", "mid_alpha", "mid_alpha must be positive".into()));
    }

    let b = &config.break_even;
    if !(b.lo > 0.0 && b.hi > b.lo && b.hi.is_finite()) {
        return Err(fail("break_even", "lo", format!("invalid bounds [{}, {}]", b.lo, b.hi)));
    }
    if !(b.rel_tol > 0.0 && b.rel_tol.is_finite()) {
        return Err(fail("break_even", "rel_tol", "rel_tol must be positive".into()));
    }
    if !(b.nbar_max > 0.0 && b.nbar_max.is_finite()) {
        return Err(fail("break_even", "nbar_max", "nbar_max must be positive".into()));
    }

    let w = &config.wigner;
    if !["zero", "one", "plus", "minus"].contains(&w.state.as_str()) {
        return Err(fail("wigner", "state", format!("unknown state '{}'", w.state)));
    }
    if w.points < 2 || !(w.extent > 0.0 && w.extent.is_finite()) {
        return Err(fail("wigner", "points", "need at least 2 points and a positive extent".into()));
    }

    let v = &config.verify;
    if v.dim < 2 || v.orders.is_empty() || v.orders.contains(&0) || v.k_max < 0 || v.theta.is_empty() {
        return Err(fail("verify", "dim", "invalid verify grid".into()));
    }

    if config.workers == Some(0) {
        return Err(fail("", "workers", "workers must be positive".into()));
    }
    Ok(LoadedConfig { config, path: path.to_path_buf(), families, schemes })
}

/// Parameter grid of one family at one order.
pub fn family_params(c: &CodesSection, family: Family, order: usize) -> Result<Vec<CodeParams>> {
    use rotcode::codes::params_for_nbar;
    let explicit: Option<Vec<CodeParams>> = match family {
        Family::Cat => c.alpha.as_ref().map(|v| v.iter().map(|&alpha| CodeParams::Cat { alpha }).collect()),
        Family::SqueezedCat => c.alpha.as_ref().map(|v| v.iter().map(|&alpha| CodeParams::SqueezedCat { alpha, r: c.squeeze_r }).collect()),
        Family::Binomial => c.k.as_ref().map(|v| v.iter().map(|&k| CodeParams::Binomial { k }).collect()),
        Family::PeggBarnett => c.s.as_ref().map(|v| v.iter().map(|&s| CodeParams::PeggBarnett { s }).collect()),
        Family::ZeroN => Some(vec![CodeParams::ZeroN]),
        _ => None,
    };
    if let Some(p) = explicit {
        return Ok(p);
    }
    if let Some(targets) = &c.nbar {
        let mut out: Vec<CodeParams> = Vec::new();
        for &t in targets {
            let p = params_for_nbar(family, order, t)?;
            if !out.contains(&p) {
                out.push(p);
            }
        }
        return Ok(out);
    }
    if let Some(m) = c.nbar_max {
        let g = rotcode::ec::family_grid(family, order, m);
        if g.is_empty() {
            bail!("no {} grid up to nbar {m}", family.name());
        }
        return Ok(g);
    }
    bail!("no parameter grid for family {}: set nbar_max, nbar or an explicit list", family.name())
}
