//! Expansion of a config into tasks, parallel evaluation and row assembly.

use crate::cache::{cache_key, Cache, Stored};
use crate::config::{family_params, Experiment, LoadedConfig, SchemeChoice, SweepConfig, VerifySection};
use crate::rows::{sort_rows, ResultRow, Value};
use anyhow::{anyhow, Result};
use rayon::prelude::*;
use rotcode::channels::{lindblad_oracle, loss_dephasing, superoperator_distance, NoiseParams};
use rotcode::codes::{standard_code, CodeParams, Family};
use rotcode::ec::{
    break_even_threshold, default_mid_code, family_grid, optimal_recovery, telecorrect_channel, trivial_baseline, EcConfig, Flavor,
    RecoveryOptions, Scheme,
};
use rotcode::fock::{wigner_grid, WignerInput};
use rotcode::gates::{propagation_residual, ErrorOp, GateSpec};
use rotcode::ModeSpace;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

pub const RESIDUAL_TOL: f64 = 1e-12;
pub const KRAUS_TOL: f64 = 1e-10;
pub const LINDBLAD_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub enum VerifyItem {
    Gate { gate: GateSpec, label: String, n: usize, theta: f64, k_max: i64, dim: usize },
    Kraus { dim: usize, kt: f64, kp: f64 },
    Lindblad { dim: usize, kt: f64, kp: f64 },
}

#[derive(Clone, Debug)]
pub enum TaskKind {
    Diagnostics { params: CodeParams },
    Ec { params: CodeParams, kt: f64, kp: f64, scheme: SchemeChoice },
    BreakEven { scheme: SchemeChoice },
    Wigner { params: CodeParams },
    Verify(VerifyItem),
}

#[derive(Clone, Debug)]
pub struct Task {
    pub kind: TaskKind,
    pub family: Family,
    pub n: usize,
}

fn param_key(p: &CodeParams) -> Vec<f64> {
    match p {
        CodeParams::Cat { alpha } => vec![*alpha],
        CodeParams::SqueezedCat { alpha, r } => vec![*alpha, *r],
        CodeParams::Binomial { k } => vec![*k as f64],
        CodeParams::PeggBarnett { s } => vec![*s as f64],
        _ => Vec::new(),
    }
}

fn label(p: &CodeParams) -> String {
    p.describe()
}

fn ec_config(cfg: &SweepConfig, params: &CodeParams, n: usize, kt: f64, kp: f64, scheme: Scheme) -> rotcode::Result<EcConfig> {
    let code = standard_code(params, n)?;
    let mut ec = EcConfig::new(code, NoiseParams::new(kt, kp)?)?
        .with_mid_code(default_mid_code(cfg.ec.mid_alpha)?)
        .with_scheme(scheme)
        .with_flavor(if cfg.ec.flavor == "hybrid" { Flavor::Hybrid } else { Flavor::Knill });
    ec.data_bins = cfg.ec.data_bins;
    ec.mid_bins = cfg.ec.mid_bins;
    Ok(ec)
}

impl Task {
    /// Cache key description, or None for tasks that always run.
    fn key_text(&self, cfg: &SweepConfig) -> Option<String> {
        let ec = &cfg.ec;
        let common = format!(
            "flavor={}\ndata_bins={:?}\nmid_bins={:?}\nmid_alpha={:016x}\n",
            ec.flavor,
            ec.data_bins,
            ec.mid_bins,
            ec.mid_alpha.to_bits()
        );
        match &self.kind {
            TaskKind::Diagnostics { params } => Some(format!("diagnostics\nN={}\nparams={params:?}\n", self.n)),
            TaskKind::Ec { params, kt, kp, scheme } => {
                let extra = if *scheme == SchemeChoice::Optimal { format!("max_dim={}\n", ec.optimal_max_dim) } else { String::new() };
                Some(format!(
                    "ec\nN={}\nparams={params:?}\nkt={:016x}\nkp={:016x}\nscheme={}\n{common}{extra}",
                    self.n,
                    kt.to_bits(),
                    kp.to_bits(),
                    scheme.name()
                ))
            }
            TaskKind::BreakEven { scheme } => {
                let b = &cfg.break_even;
                Some(format!(
                    "break_even\nfamily={}\nN={}\nnbar_max={:016x}\nlo={:016x}\nhi={:016x}\nrel_tol={:016x}\nratio={:016x}\nscheme={}\n{common}",
                    self.family.name(),
                    self.n,
                    b.nbar_max.to_bits(),
                    b.lo.to_bits(),
                    b.hi.to_bits(),
                    b.rel_tol.to_bits(),
                    cfg.noise.ratio.to_bits(),
                    scheme.name()
                ))
            }
            TaskKind::Wigner { params } => {
                let w = &cfg.wigner;
                Some(format!("wigner\nN={}\nparams={params:?}\nstate={}\nextent={:016x}\npoints={}\n", self.n, w.state, w.extent.to_bits(), w.points))
            }
            TaskKind::Verify(_) => None,
        }
    }

    fn describe(&self) -> String {
        match &self.kind {
            TaskKind::Diagnostics { params } | TaskKind::Wigner { params } => format!("{} N={} {}", self.family.name(), self.n, label(params)),
            TaskKind::Ec { params, kt, scheme, .. } => format!("{} N={} {} kt={kt:e} {}", self.family.name(), self.n, label(params), scheme.name()),
            TaskKind::BreakEven { scheme } => format!("break-even {} N={} {}", self.family.name(), self.n, scheme.name()),
            TaskKind::Verify(v) => format!("{v:?}"),
        }
    }

    fn compute(&self, cfg: &SweepConfig) -> rotcode::Result<Stored> {
        match &self.kind {
            TaskKind::Diagnostics { params } => {
                let code = standard_code(params, self.n)?;
                let d = code.diagnostics();
                Ok(Stored {
                    nbar: Some(d.nbar),
                    metrics: vec![
                        ("delta_canonical".into(), d.delta_canonical),
                        ("delta_heterodyne".into(), d.delta_heterodyne),
                        ("mean_modular_phase_abs".into(), d.mean_modular_phase.norm()),
                        ("number_distance".into(), code.number_distance() as f64),
                    ],
                })
            }
            TaskKind::Ec { params, kt, kp, scheme } => {
                let (report, nbar) = match scheme {
                    SchemeChoice::Fixed(s) => {
                        let ec = ec_config(cfg, params, self.n, *kt, *kp, *s)?;
                        (telecorrect_channel(&ec)?, ec.data_code.diagnostics().nbar)
                    }
                    SchemeChoice::Optimal => {
                        let ec = ec_config(cfg, params, self.n, *kt, *kp, Scheme::PrettyGood)?;
                        let opts = RecoveryOptions { max_dim: cfg.ec.optimal_max_dim, ..RecoveryOptions::default() };
                        (optimal_recovery(&ec, opts)?, ec.data_code.diagnostics().nbar)
                    }
                };
                Ok(Stored { nbar: Some(nbar), metrics: vec![("infidelity".into(), report.infidelity())] })
            }
            TaskKind::BreakEven { scheme } => {
                let s = match scheme {
                    SchemeChoice::Fixed(s) => *s,
                    SchemeChoice::Optimal => return Err(rotcode::Error::InvalidParameter("break_even needs a fixed scheme".into())),
                };
                let b = &cfg.break_even;
                let grid = family_grid(self.family, self.n, b.nbar_max);
                let first = grid.first().ok_or_else(|| rotcode::Error::InvalidParameter(format!("empty {} grid", self.family.name())))?;
                let base = ec_config(cfg, first, self.n, 0.0, 0.0, s)?;
                let r = break_even_ratio(&base, &grid, b.lo, b.hi, b.rel_tol, cfg.noise.ratio)?;
                Ok(Stored {
                    nbar: None,
                    metrics: vec![
                        ("kappa_t_break_even".into(), r.kappa_t),
                        ("bracket_lo".into(), r.bracket.0),
                        ("bracket_hi".into(), r.bracket.1),
                        ("evaluations".into(), r.evaluations as f64),
                    ],
                })
            }
            TaskKind::Wigner { params } => {
                let code = standard_code(params, self.n)?;
                let state = match cfg.wigner.state.as_str() {
                    "zero" => code.codeword(0),
                    "one" => code.codeword(1),
                    "minus" => code.minus(),
                    _ => code.plus(),
                };
                let xs = axis(cfg);
                let g = wigner_grid(WignerInput::Vector(&state), &xs, &xs);
                if let Some(w) = &g.warning {
                    eprintln!("warning: {} N={} {}: {w}", self.family.name(), self.n, label(params));
                }
                let metrics = g.values.transpose().iter().map(|v| ("wigner".to_string(), *v)).collect();
                Ok(Stored { nbar: Some(code.diagnostics().nbar), metrics })
            }
            TaskKind::Verify(item) => verify_item(item),
        }
    }
}

/// Break-even with κ_φt = ratio·κt. The library search uses ratio 1.
fn break_even_ratio(
    base: &EcConfig,
    grid: &[CodeParams],
    lo: f64,
    hi: f64,
    rel_tol: f64,
    ratio: f64,
) -> rotcode::Result<rotcode::ec::BreakEven> {
    if ratio == 1.0 {
        return break_even_threshold(base, grid, lo, hi, rel_tol);
    }
    let gap = |kt: f64| -> rotcode::Result<f64> {
        let noise = NoiseParams::new(kt, ratio * kt)?;
        let mut best = f64::INFINITY;
        for p in grid {
            let Ok(code) = standard_code(p, base.data_code.order()) else { continue };
            let cfg = EcConfig { data_code: code, noise: rotcode::ec::Noise::LossDephasing(noise), ..base.clone() };
            best = best.min(telecorrect_channel(&cfg)?.infidelity());
        }
        Ok(best - trivial_baseline(noise))
    };
    let (f_lo, f_hi) = (gap(lo)?, gap(hi)?);
    if f_lo.signum() == f_hi.signum() {
        return Err(rotcode::Error::NoSignChange { lo, hi });
    }
    let (mut a, mut b, mut evals) = (lo, hi, 2);
    while b / a > 1.0 + rel_tol {
        let m = (a * b).sqrt();
        evals += 1;
        if gap(m)?.signum() == f_lo.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(rotcode::ec::BreakEven { kappa_t: (a * b).sqrt(), bracket: (a, b), evaluations: evals })
}

fn axis(cfg: &SweepConfig) -> Vec<f64> {
    let w = &cfg.wigner;
    (0..w.points).map(|i| -w.extent + 2.0 * w.extent * i as f64 / (w.points - 1) as f64).collect()
}

fn verify_item(item: &VerifyItem) -> rotcode::Result<Stored> {
    let metrics = match item {
        VerifyItem::Gate { gate, theta, k_max, dim, .. } => {
            let mut m = Vec::new();
            for k in -k_max..=*k_max {
                m.push((format!("residual_k{k:+}"), propagation_residual(gate, &ErrorOp::new(k, *theta), *dim)?));
            }
            m
        }
        VerifyItem::Kraus { dim, kt, kp } => {
            let ch = loss_dephasing(ModeSpace::new(*dim)?, NoiseParams::new(*kt, *kp)?)?;
            vec![("completeness_defect".into(), ch.completeness_defect())]
        }
        VerifyItem::Lindblad { dim, kt, kp } => {
            let space = ModeSpace::new(*dim)?;
            let p = NoiseParams::new(*kt, *kp)?;
            let kraus = loss_dephasing(space, p)?.superoperator()?;
            let oracle = lindblad_oracle(space, p, 1.0)?;
            vec![("lindblad_distance".into(), superoperator_distance(&kraus, &oracle))]
        }
    };
    Ok(Stored { nbar: None, metrics })
}

/// Threshold of a verification metric.
pub fn threshold(metric: &str) -> f64 {
    if metric.starts_with("residual") {
        RESIDUAL_TOL
    } else if metric == "completeness_defect" {
        KRAUS_TOL
    } else {
        LINDBLAD_TOL
    }
}

pub fn verify_tasks(v: &VerifySection) -> Vec<Task> {
    let mut out = Vec::new();
    let mut push = |gate: GateSpec, label: String, n: usize| {
        for &theta in &v.theta {
            out.push(Task {
                kind: TaskKind::Verify(VerifyItem::Gate { gate, label: label.clone(), n, theta, k_max: v.k_max, dim: v.dim }),
                family: Family::Trivial,
                n,
            });
        }
    };
    for &n in &v.orders {
        push(GateSpec::Z { n }, "Z".into(), n);
        push(GateSpec::S { n }, "S".into(), n);
        push(GateSpec::T { n }, "T".into(), n);
        for &m in &v.orders {
            push(GateSpec::Crot { n, m }, format!("CROT;M={m}"), n);
            push(GateSpec::ControlledR { n, m }, format!("CR;M={m}"), n);
        }
    }
    for (kt, kp) in [(1e-3, 1e-3), (0.01, 0.0), (0.0, 0.01), (0.1, 0.1), (0.3, 0.05)] {
        out.push(Task { kind: TaskKind::Verify(VerifyItem::Kraus { dim: 30, kt, kp }), family: Family::Trivial, n: 0 });
    }
    out.push(Task { kind: TaskKind::Verify(VerifyItem::Lindblad { dim: 30, kt: 0.1, kp: 0.1 }), family: Family::Trivial, n: 0 });
    out
}

/// Tasks of a config, in a fixed order.
pub fn expand(lc: &LoadedConfig) -> Result<Vec<Task>> {
    let cfg = &lc.config;
    let mut tasks = Vec::new();
    if cfg.experiment == Experiment::VerifyIdentities {
        return Ok(verify_tasks(&cfg.verify));
    }
    for &family in &lc.families {
        for &n in &cfg.codes.orders {
            if cfg.experiment == Experiment::BreakEven {
                for &scheme in &lc.schemes {
                    tasks.push(Task { kind: TaskKind::BreakEven { scheme }, family, n });
                }
                continue;
            }
            let params = family_params(&cfg.codes, family, n).map_err(|e| anyhow!("{}: {e}", lc.path.display()))?;
            for p in params {
                match cfg.experiment {
                    Experiment::Diagnostics => tasks.push(Task { kind: TaskKind::Diagnostics { params: p }, family, n }),
                    Experiment::Wigner => tasks.push(Task { kind: TaskKind::Wigner { params: p }, family, n }),
                    Experiment::EcSweepNbar | Experiment::EcSweepNoise => {
                        for &kt in &cfg.noise.kappa_t {
                            for &scheme in &lc.schemes {
                                let kind = TaskKind::Ec { params: p.clone(), kt, kp: cfg.noise.ratio * kt, scheme };
                                tasks.push(Task { kind, family, n });
                            }
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
    Ok(tasks)
}

pub struct Evaluated {
    pub task: Task,
    pub result: std::result::Result<Stored, String>,
    pub cache_hit: bool,
}

fn evaluate(task: Task, cfg: &SweepConfig, cache: Option<&Cache>) -> Evaluated {
    let key = task.key_text(cfg).map(|t| cache_key(&t));
    let cache = cache.filter(|_| key.is_some());
    let _lease = match (cache, &key) {
        (Some(c), Some(k)) => c.lease(k).ok(),
        _ => None,
    };
    if let (Some(c), Some(k)) = (cache, &key) {
        if let Some(stored) = c.get(k) {
            return Evaluated { task, result: Ok(stored), cache_hit: true };
        }
    }
    let result = match catch_unwind(AssertUnwindSafe(|| task.compute(cfg))) {
        Ok(Ok(s)) => Ok(s),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into())),
    };
    if let (Ok(s), Some(c), Some(k)) = (&result, cache, &key) {
        if let Err(e) = c.put(k, s) {
            eprintln!("warning: cache write failed: {e}");
        }
    }
    Evaluated { task, result, cache_hit: false }
}

/// Evaluate tasks on `workers` threads; output order matches input order.
pub fn evaluate_all(tasks: Vec<Task>, cfg: &SweepConfig, cache: Option<&Cache>, workers: usize) -> Result<Vec<Evaluated>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let total = tasks.len();
    let done = AtomicUsize::new(0);
    Ok(pool.install(|| {
        tasks
            .into_par_iter()
            .map(|t| {
                let what = t.describe();
                let e = evaluate(t, cfg, cache);
                let i = done.fetch_add(1, Ordering::Relaxed) + 1;
                let how = match (&e.result, e.cache_hit) {
                    (Err(_), _) => "failed",
                    (Ok(_), true) => "cached",
                    (Ok(_), false) => "computed",
                };
                eprintln!("[{i}/{total}] {what}: {how}");
                e
            })
            .collect()
    }))
}

fn base_row(experiment: Experiment, task: &Task) -> ResultRow {
    ResultRow {
        experiment: experiment.name().into(),
        family: if matches!(task.kind, TaskKind::Verify(_)) { String::new() } else { task.family.name().into() },
        n: (task.n > 0).then_some(task.n),
        param: String::new(),
        nbar: None,
        kappa_t: None,
        kappa_phi_t: None,
        scheme: String::new(),
        metric: String::new(),
        value: Value::Num(0.0),
        runtime_s: None,
        cache_hit: false,
        sort_param: Vec::new(),
        sort_point: Vec::new(),
    }
}

fn baseline_rows(experiment: Experiment, cfg: &SweepConfig) -> Vec<ResultRow> {
    cfg.noise
        .kappa_t
        .iter()
        .map(|&kt| {
            let kp = cfg.noise.ratio * kt;
            ResultRow {
                experiment: experiment.name().into(),
                family: "trivial".into(),
                n: Some(1),
                param: String::new(),
                nbar: Some(0.5),
                kappa_t: Some(kt),
                kappa_phi_t: Some(kp),
                scheme: "none".into(),
                metric: "baseline_infidelity".into(),
                value: Value::Num(NoiseParams::new(kt, kp).map(trivial_baseline).unwrap_or(f64::NAN)),
                runtime_s: None,
                cache_hit: false,
                sort_param: Vec::new(),
                sort_point: Vec::new(),
            }
        })
        .collect()
}

/// Rows of evaluated tasks, sorted.
pub fn assemble(experiment: Experiment, cfg: &SweepConfig, evaluated: &[Evaluated]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for e in evaluated {
        let mut base = base_row(experiment, &e.task);
        base.cache_hit = e.cache_hit;
        match &e.task.kind {
            TaskKind::Diagnostics { params } | TaskKind::Wigner { params } => {
                base.param = label(params);
                base.sort_param = param_key(params);
            }
            TaskKind::Ec { params, kt, kp, scheme } => {
                base.param = label(params);
                base.sort_param = param_key(params);
                base.kappa_t = Some(*kt);
                base.kappa_phi_t = Some(*kp);
                base.scheme = scheme.name().into();
            }
            TaskKind::BreakEven { scheme } => {
                base.param = format!("nbar<={}", cfg.break_even.nbar_max);
                base.scheme = scheme.name().into();
            }
            TaskKind::Verify(VerifyItem::Gate { label, theta, .. }) => base.param = format!("gate={label};theta={theta}"),
            TaskKind::Verify(VerifyItem::Kraus { dim, kt, kp } | VerifyItem::Lindblad { dim, kt, kp }) => {
                base.param = format!("dim={dim}");
                base.kappa_t = Some(*kt);
                base.kappa_phi_t = Some(*kp);
            }
        }
        if experiment == Experiment::EcSweepNoise {
            continue;
        }
        match &e.result {
            Err(msg) => rows.push(ResultRow { metric: "error".into(), value: Value::Text(msg.clone()), ..base }),
            Ok(s) => {
                base.nbar = s.nbar;
                if let TaskKind::Wigner { params } = &e.task.kind {
                    let xs = axis(cfg);
                    let np = xs.len();
                    for (i, (_, v)) in s.metrics.iter().enumerate() {
                        let (x, y) = (xs[i % np], xs[i / np]);
                        let mut sp = param_key(params);
                        sp.extend([y, x]);
                        rows.push(ResultRow {
                            param: format!("{};x={x:.6};y={y:.6}", base.param),
                            sort_param: sp,
                            metric: "wigner".into(),
                            value: Value::Num(*v),
                            ..base.clone()
                        });
                    }
                    continue;
                }
                for (m, v) in &s.metrics {
                    rows.push(ResultRow { metric: m.clone(), value: Value::Num(*v), ..base.clone() });
                }
            }
        }
    }
    if experiment == Experiment::EcSweepNoise {
        rows.extend(noise_minima(cfg, evaluated));
    }
    if matches!(experiment, Experiment::EcSweepNbar | Experiment::EcSweepNoise) {
        rows.extend(baseline_rows(experiment, cfg));
    }
    sort_rows(&mut rows);
    rows
}

/// Best grid point per (family, N, κt, scheme).
fn noise_minima(cfg: &SweepConfig, evaluated: &[Evaluated]) -> Vec<ResultRow> {
    let mut groups: Vec<(Family, usize, u64, SchemeChoice, Vec<&Evaluated>)> = Vec::new();
    for e in evaluated {
        if let TaskKind::Ec { kt, scheme, .. } = &e.task.kind {
            let key = (e.task.family, e.task.n, kt.to_bits(), *scheme);
            match groups.iter_mut().find(|g| (g.0, g.1, g.2, g.3) == key) {
                Some(g) => g.4.push(e),
                None => groups.push((key.0, key.1, key.2, key.3, vec![e])),
            }
        }
    }
    let mut rows = Vec::new();
    for (family, n, kt_bits, scheme, members) in groups {
        let kt = f64::from_bits(kt_bits);
        let mut best: Option<(f64, &Evaluated)> = None;
        for e in &members {
            if let Ok(s) = &e.result {
                let v = s.metrics.iter().find(|(m, _)| m == "infidelity").map(|x| x.1).unwrap_or(f64::NAN);
                if best.map_or(true, |(b, _)| v < b) {
                    best = Some((v, e));
                }
            }
        }
        let mut row = base_row(Experiment::EcSweepNoise, &Task { kind: members[0].task.kind.clone(), family, n });
        row.kappa_t = Some(kt);
        row.kappa_phi_t = Some(cfg.noise.ratio * kt);
        row.scheme = scheme.name().into();
        row.cache_hit = members.iter().all(|e| e.cache_hit);
        match best {
            Some((v, e)) => {
                if let TaskKind::Ec { params, .. } = &e.task.kind {
                    row.param = label(params);
                }
                row.nbar = e.result.as_ref().ok().and_then(|s| s.nbar);
                row.metric = "min_infidelity".into();
                row.value = Value::Num(v);
            }
            None => {
                row.metric = "error".into();
                row.value = Value::Text("every grid point failed".into());
            }
        }
        rows.push(row);
    }
    rows
}

/// Worker count: `ROTCODE_WORKERS`, then the config, then the machine.
pub fn resolve_workers(cfg: &SweepConfig) -> Result<usize> {
    if let Ok(v) = std::env::var("ROTCODE_WORKERS") {
        let w: usize = v.trim().parse().map_err(|_| anyhow!("ROTCODE_WORKERS must be a positive integer, got '{v}'"))?;
        if w == 0 {
            return Err(anyhow!("ROTCODE_WORKERS must be positive"));
        }
        return Ok(w);
    }
    Ok(cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}

/// Cache directory: `ROTCODE_CACHE_DIR` (empty disables), then the config,
/// then `.rotcode-cache` next to the config file.
pub fn resolve_cache_dir(lc: &LoadedConfig) -> Option<PathBuf> {
    match std::env::var_os("ROTCODE_CACHE_DIR") {
        Some(v) if v.is_empty() => None,
        Some(v) => Some(PathBuf::from(v)),
        None => Some(lc.resolve(lc.config.cache_dir.as_deref().unwrap_or(std::path::Path::new(".rotcode-cache")))),
    }
}

pub struct RunOutcome {
    pub rows: Vec<ResultRow>,
    pub output: PathBuf,
    pub computed: usize,
    pub cache_hits: usize,
    pub failures: usize,
    /// For verify_identities: every metric within its threshold.
    pub verified: Option<bool>,
}

pub fn all_within_thresholds(rows: &[ResultRow]) -> bool {
    rows.iter().all(|r| match &r.value {
        Value::Num(v) => *v <= threshold(&r.metric),
        Value::Text(_) => false,
    })
}

/// Run a loaded config and write its CSV.
pub fn run(lc: &LoadedConfig) -> Result<RunOutcome> {
    let cfg = &lc.config;
    let workers = resolve_workers(cfg)?;
    let cache = match resolve_cache_dir(lc) {
        Some(dir) => Some(Cache::open(&dir)?),
        None => None,
    };
    let tasks = expand(lc)?;
    let evaluated = evaluate_all(tasks, cfg, cache.as_ref(), workers)?;
    let rows = assemble(cfg.experiment, cfg, &evaluated);
    let output = lc.output_path();
    if let Some(dir) = output.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let tmp = output.with_extension("csv.partial");
    std::fs::write(&tmp, crate::rows::to_csv(&rows))?;
    std::fs::rename(&tmp, &output)?;
    let cache_hits = evaluated.iter().filter(|e| e.cache_hit).count();
    let failures = evaluated.iter().filter(|e| e.result.is_err()).count();
    let verified = (cfg.experiment == Experiment::VerifyIdentities).then(|| all_within_thresholds(&rows));
    Ok(RunOutcome { computed: evaluated.len() - cache_hits, cache_hits, failures, rows, output, verified })
}
