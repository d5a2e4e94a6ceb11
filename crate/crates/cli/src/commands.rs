use crate::config::{parse_grid, parse_list, Params};
use crate::error::CliError;
use crate::report::{Cell, Report, Table};
use clap::Args;
use ghzbayes::adaptive::{self, MeasurementPlan, OptimizerConfig, SelectMode};
use ghzbayes::clock::{self, ClockConfig, ClockModel, Protocol};
use ghzbayes::mc::{Estimate, McConfig};
use ghzbayes::noise::{self, DecayAxis, NoiseModel};
use ghzbayes::partitions::{self, Partition};
use ghzbayes::prior::{self, PriorGrid, PriorKind};
use ghzbayes::schemes::{self, FixedBlockConfig, VaryingBlockConfig};
use ghzbayes::unwind::{self, ExtendedPartition, UnwindAllocation, UnwindMode, UnwindSearch};
use ghzbayes::{fit, oqi};
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

/// Shared context handed to every command.
pub struct Ctx<'a> {
    pub params: Params<'a>,
    pub seed_flag: Option<u64>,
}

impl Ctx<'_> {
    fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: std::str::FromStr + std::fmt::Display,
        T::Err: std::fmt::Display,
    {
        let sec = self.params.section();
        self.params.opt(key, flag)?.ok_or_else(|| CliError::at(sec, key, "is required"))
    }

    fn seed(&mut self, default: u64) -> Result<u64, CliError> {
        let f = self.seed_flag;
        self.params.get("seed", f, default)
    }

    fn bad(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::at(self.params.section(), key, msg)
    }

    fn positive(&self, key: &str, v: f64) -> Result<f64, CliError> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad(key, format!("must be positive and finite, got {v}")))
        }
    }

    fn count(&self, key: &str, v: usize) -> Result<usize, CliError> {
        if v == 0 {
            Err(self.bad(key, "must be at least 1"))
        } else {
            Ok(v)
        }
    }

    fn grid(&self, key: &str, spec: &str) -> Result<Vec<f64>, CliError> {
        parse_grid(spec).map_err(|e| self.bad(key, e))
    }

    fn list<T: std::str::FromStr>(&self, key: &str, spec: &str) -> Result<Vec<T>, CliError> {
        parse_list(spec).map_err(|e| self.bad(key, e))
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct PriorArgs {
    /// Prior family: gaussian or uniform
    #[arg(long)]
    pub prior: Option<String>,
    /// Width δφ of the Gaussian prior (rad)
    #[arg(long)]
    pub delta_phi: Option<f64>,
    /// Lower end of the uniform prior (rad)
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Upper end of the uniform prior (rad)
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
}

struct PriorSpec {
    kind: PriorKind,
    delta_phi: f64,
    lo: f64,
    hi: f64,
}

impl PriorSpec {
    fn resolve(a: &PriorArgs, ctx: &mut Ctx) -> Result<PriorSpec, CliError> {
        let name = ctx.params.get("prior", a.prior.clone(), "gaussian".to_string())?;
        let kind = match name.as_str() {
            "gaussian" => PriorKind::Gaussian,
            "uniform" => PriorKind::Uniform,
            other => return Err(ctx.bad("prior", format!("expected gaussian or uniform, got {other:?}"))),
        };
        if kind == PriorKind::Gaussian {
            let d = ctx.params.get("delta_phi", a.delta_phi, 0.7)?;
            let d = ctx.positive("delta_phi", d)?;
            Ok(PriorSpec { kind, delta_phi: d, lo: -8.0 * d, hi: 8.0 * d })
        } else {
            let lo = ctx.params.get("lo", a.lo, -PI / 2.0)?;
            let hi = ctx.params.get("hi", a.hi, PI / 2.0)?;
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(ctx.bad("hi", format!("uniform prior needs lo < hi, got [{lo}, {hi}]")));
            }
            Ok(PriorSpec { kind, delta_phi: (hi - lo) / 12f64.sqrt(), lo, hi })
        }
    }

    fn grid(&self, bandwidth: usize) -> Result<PriorGrid, CliError> {
        Ok(match self.kind {
            PriorKind::Gaussian => prior::gaussian_for(self.delta_phi, bandwidth)?,
            PriorKind::Uniform => prior::uniform_for(self.lo, self.hi, bandwidth)?,
        })
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct OptArgs {
    /// Optimiser restarts
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Adam steps per restart
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Adam step size
    #[arg(long)]
    pub step: Option<f64>,
}

fn optimizer(a: &OptArgs, ctx: &mut Ctx, seed: u64) -> Result<OptimizerConfig, CliError> {
    let d = OptimizerConfig::default();
    let restarts = ctx.params.get("restarts", a.restarts, d.restarts)?;
    let restarts = ctx.count("restarts", restarts)?;
    let max_steps = ctx.params.get("max_steps", a.max_steps, d.max_steps)?;
    let step = ctx.params.get("step", a.step, d.step)?;
    let step = ctx.positive("step", step)?;
    Ok(OptimizerConfig { restarts, max_steps, step, seed, ..d })
}

#[derive(Args, Debug, Clone, Default)]
pub struct NoiseArgs {
    /// Amplitude-damping probability per qubit
    #[arg(long)]
    pub p_a: Option<f64>,
    /// Bit-flip probability per qubit
    #[arg(long)]
    pub p_e: Option<f64>,
    /// Per-qubit state-preparation fidelity
    #[arg(long)]
    pub f0: Option<f64>,
}

fn noise_model(a: &NoiseArgs, ctx: &mut Ctx) -> Result<NoiseModel, CliError> {
    let p_a = ctx.params.get("p_a", a.p_a, 0.0)?;
    let p_e = ctx.params.get("p_e", a.p_e, 0.0)?;
    let f0 = ctx.params.get("f0", a.f0, 1.0)?;
    NoiseModel::new(p_a, p_e, f0).map_err(|e| ctx.bad("noise", e))
}

fn select_mode(ctx: &mut Ctx, flag: Option<String>) -> Result<SelectMode, CliError> {
    let s = ctx.params.get("select", flag, "rank".to_string())?;
    match s.as_str() {
        "rank" => Ok(SelectMode::Rank),
        "all" => Ok(SelectMode::OptimizeAll),
        _ => match s.strip_prefix("top:").and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k > 0 => Ok(SelectMode::OptimizeTopK(k)),
            _ => Err(ctx.bad("select", format!("expected rank, all or top:K, got {s:?}"))),
        },
    }
}

/// Best partition by optimal-measurement BMSE that fits the plan size limit.
fn ranked_winner(n: usize, g: &PriorGrid, k_cap: Option<u32>) -> Result<(Partition, bool), CliError> {
    let (ranked, truncated) = adaptive::rank_partitions(n, g, k_cap, 1_000_000)?;
    let skipped = ranked.first().is_some_and(|(p, _)| p.copies() > adaptive::MAX_COPIES);
    let p = ranked
        .into_iter()
        .map(|x| x.0)
        .find(|p| p.copies() <= adaptive::MAX_COPIES)
        .ok_or_else(|| CliError::Budget(format!("no partition of {n} fits the plan size limit")))?;
    Ok((p, truncated || skipped))
}

fn oqi_bmse(n: usize, prior: &PriorGrid) -> Result<f64, CliError> {
    Ok(oqi::solve_oqi(n, prior, &oqi::OqiOptions::default())?.bmse)
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v)?;
    fs::write(path, s + "\n").map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------- partitions

#[derive(Args, Debug, Clone)]
pub struct PartitionsArgs {
    /// Total number of qubits
    #[arg(long)]
    pub n: Option<usize>,
    /// Largest block exponent k (blocks of at most 2^k qubits)
    #[arg(long)]
    pub k_cap: Option<u32>,
    /// Rank by optimal-measurement BMSE under a Gaussian prior of this width
    #[arg(long)]
    pub delta_phi: Option<f64>,
    /// Maximum number of partitions enumerated
    #[arg(long)]
    pub budget: Option<usize>,
}

pub fn partitions(a: &PartitionsArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let n = ctx.required("n", a.n)?;
    let n = ctx.count("n", n)?;
    let k_cap = ctx.params.opt("k_cap", a.k_cap)?;
    let budget = ctx.params.get("budget", a.budget, 1_000_000usize)?;
    let budget = ctx.count("budget", budget)?;
    let delta = ctx.params.opt("delta_phi", a.delta_phi)?;
    let mut t = Table::new("partitions", &["index", "partition", "blocks", "n", "fisher", "bmse"]);
    let (list, truncated): (Vec<(Partition, Option<f64>)>, bool) = match delta {
        Some(d) => {
            let d = ctx.positive("delta_phi", d)?;
            let g = prior::gaussian_for(d, n)?;
            let (ranked, tr) = adaptive::rank_partitions(n, &g, k_cap, budget)?;
            (ranked.into_iter().map(|(p, b)| (p, Some(b))).collect(), tr)
        }
        None => {
            let e = partitions::enumerate_partitions_budget(n, k_cap, budget)?;
            (e.partitions.into_iter().map(|p| (p, None)).collect(), e.truncated)
        }
    };
    if delta.is_none() {
        t.columns.pop();
    }
    for (i, (p, b)) in list.iter().enumerate() {
        let mut row: Vec<Cell> =
            vec![i.into(), p.to_string().into(), p.copies().into(), p.n_total().into(), p.fisher().into()];
        if let Some(b) = b {
            row.push((*b).into());
        }
        t.push(row);
    }
    r.set("count", list.len());
    r.set("binary_partition_count", partitions::binary_partition_count(n).to_string());
    if let Some((p, Some(b))) = list.first() {
        r.set("best", p.to_string());
        r.set("best_bmse", *b);
    }
    r.budget_limited = truncated;
    r.tables.push(t);
    Ok(())
}

// ---------------------------------------------------------------- oqi

#[derive(Args, Debug, Clone)]
pub struct OqiArgs {
    /// Total number of qubits
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Extra random starting states for the alternating optimisation
    #[arg(long)]
    pub random_starts: Option<usize>,
    /// Relative convergence tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Tabulate MSE(φ) on this grid, e.g. -3.14:3.14:lin201
    #[arg(long, allow_hyphen_values = true)]
    pub phis: Option<String>,
}

pub fn oqi(a: &OqiArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let n = ctx.required("n", a.n)?;
    let n = ctx.count("n", n)?;
    let spec = PriorSpec::resolve(&a.prior, ctx)?;
    let seed = ctx.seed(0)?;
    r.seed = Some(seed);
    let d = oqi::OqiOptions::default();
    let opts = oqi::OqiOptions {
        tol: ctx.params.get("tol", a.tol, d.tol)?,
        max_iter: ctx.params.get("max_iter", a.max_iter, d.max_iter)?,
        random_starts: ctx.params.get("random_starts", a.random_starts, d.random_starts)?,
        seed,
    };
    ctx.count("max_iter", opts.max_iter)?;
    ctx.positive("tol", opts.tol)?;
    let phis = ctx.params.opt("phis", a.phis.clone())?;
    let g = spec.grid(n)?;
    let sol = oqi::solve_oqi(n, &g, &opts)?;
    r.set("bmse", sol.bmse);
    r.set("rbmse", sol.bmse.sqrt());
    r.set("rbmse_over_delta_phi", sol.bmse.sqrt() / spec.delta_phi);
    r.set("n_times_rbmse", n as f64 * sol.bmse.sqrt());
    r.set("iterations", sol.iterations);
    r.set("converged", sol.converged);
    if let Some(spec) = phis {
        let xs = ctx.grid("phis", &spec)?;
        let mut t = Table::new("curve", &["phi", "mse"]);
        for (x, m) in xs.iter().zip(oqi::mse_curve(&sol, &xs)) {
            t.push(vec![(*x).into(), m.into()]);
        }
        r.tables.push(t);
    }
    let mut t = Table::new("populations", &["n", "population"]);
    for (i, p) in sol.populations().into_iter().enumerate() {
        t.push(vec![i.into(), p.into()]);
    }
    r.tables.push(t);
    Ok(())
}

// ---------------------------------------------------------------- optimize

#[derive(Args, Debug, Clone)]
pub struct OptimizeArgs {
    /// Total number of qubits
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Partition to optimise, e.g. 3x4+3x2+3x1; chosen automatically if absent
    #[arg(long)]
    pub partition: Option<String>,
    /// Partition selection: rank, all, or top:K
    #[arg(long)]
    pub select: Option<String>,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Write the optimised plan as JSON
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
    /// Tabulate MSE(φ) of the plan, CSS and OQI on this grid
    #[arg(long, allow_hyphen_values = true)]
    pub phis: Option<String>,
}

pub fn optimize(a: &OptimizeArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let n = ctx.required("n", a.n)?;
    let n = ctx.count("n", n)?;
    let spec = PriorSpec::resolve(&a.prior, ctx)?;
    let seed = ctx.seed(0)?;
    r.seed = Some(seed);
    let cfg = optimizer(&a.opt, ctx, seed)?;
    let nm = noise_model(&a.noise, ctx)?;
    let part = ctx.params.opt("partition", a.partition.clone())?;
    let mode = select_mode(ctx, a.select.clone())?;
    let phis = ctx.params.opt("phis", a.phis.clone())?;
    let g = spec.grid(n)?;

    let (plan, partition) = match part {
        Some(s) => {
            let p: Partition = s.parse().map_err(|e| ctx.bad("partition", e))?;
            if p.n_total() != n {
                return Err(ctx.bad("partition", format!("{p} has {} qubits, expected {n}", p.n_total())));
            }
            (adaptive::initial_plan(&p, &g)?, p)
        }
        None if mode == SelectMode::Rank => {
            let (p, limited) = ranked_winner(n, &g, None)?;
            r.budget_limited |= limited;
            (adaptive::initial_plan(&p, &g)?, p)
        }
        None => {
            let sel = adaptive::select_best_partition(n, &g, mode, &cfg)?;
            r.budget_limited |= sel.budget_limited;
            (sel.plan, sel.partition)
        }
    };
    let o = if nm.is_ideal() {
        adaptive::optimize_plan(&plan, &g, &cfg)
    } else {
        noise::optimize_noisy(&plan, &g, &nm, &cfg)
    };
    let css = schemes::css_bmse(n, &g)?;
    let q = oqi_bmse(n, &g)?;
    let gain = css / o.bmse;
    r.set("partition", partition.to_string());
    r.set("bmse", o.bmse);
    r.set("rbmse", o.bmse.sqrt());
    r.set("initial_bmse", o.initial_bmse);
    r.set("css_bmse", css);
    r.set("gain", gain);
    r.set("gain_db", schemes::db(gain));
    r.set("oqi_bmse", q);
    r.set("overhead_vs_oqi", (o.bmse / q).sqrt());
    if !nm.is_ideal() {
        let c1 = nm.contrast(1);
        r.set("css_noisy_bmse", schemes::css_bmse_with(n, &g, c1)?);
    }
    let mut t = Table::new("restarts", &["restart", "initial_bmse", "bmse", "steps", "converged", "diverged"]);
    for (i, rr) in o.restarts.iter().enumerate() {
        t.push(vec![
            i.into(),
            rr.initial_bmse.into(),
            rr.bmse.into(),
            rr.steps.into(),
            rr.converged.into(),
            rr.diverged.into(),
        ]);
    }
    if let Some(spec) = phis {
        let xs = ctx.grid("phis", &spec)?;
        let ev = noise::noisy_evaluator(&o.plan, &g, &nm);
        let mine = ev.mse_curve(&o.plan.rotations, &xs);
        let css_c = schemes::css_mse_curve(n, &g, &xs)?;
        let sol = oqi::solve_oqi(n, &g, &oqi::OqiOptions::default())?;
        let oqi_c = oqi::mse_curve(&sol, &xs);
        let mut c = Table::new("curve", &["phi", "mse_plan", "mse_css", "mse_oqi"]);
        for i in 0..xs.len() {
            c.push(vec![xs[i].into(), mine[i].into(), css_c[i].into(), oqi_c[i].into()]);
        }
        r.tables.push(c);
    }
    r.tables.push(t);
    if let Some(path) = ctx.params.opt("plan_out", a.plan_out.as_ref().map(|p| p.display().to_string()))? {
        write_json(Path::new(&path), &o.plan.to_json())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- sweep-prior

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Total number of qubits
    #[arg(long)]
    pub n: Option<usize>,
    /// Prior widths: lo:hi:logK, lo:hi:linK or a comma list
    #[arg(long)]
    pub delta_phi: Option<String>,
    /// Partition selection: rank, all, or top:K
    #[arg(long)]
    pub select: Option<String>,
    #[command(flatten)]
    pub opt: OptArgs,
    /// Directory for per-point shards and the manifest; enables resuming
    #[arg(long)]
    pub shard_dir: Option<PathBuf>,
}

fn sweep_point(n: usize, d: f64, mode: SelectMode, cfg: &OptimizerConfig) -> Result<Value, CliError> {
    let g = prior::gaussian_for(d, n)?;
    let sel = adaptive::select_best_partition(n, &g, mode, cfg)?;
    let css = schemes::css_bmse(n, &g)?;
    let q = oqi_bmse(n, &g)?;
    let gain = css / sel.bmse;
    Ok(json!({
        "delta_phi": d,
        "partition": sel.partition.to_string(),
        "bmse": sel.bmse,
        "rbmse_over_delta_phi": sel.bmse.sqrt() / d,
        "css_bmse": css,
        "gain": gain,
        "gain_db": schemes::db(gain),
        "oqi_bmse": q,
        "overhead_vs_oqi": (sel.bmse / q).sqrt(),
        "budget_limited": sel.budget_limited,
    }))
}

pub fn sweep_prior(a: &SweepArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let n = ctx.required("n", a.n)?;
    let n = ctx.count("n", n)?;
    let spec = ctx.params.get("delta_phi", a.delta_phi.clone(), "0.01:2.0:log24".to_string())?;
    let deltas = ctx.grid("delta_phi", &spec)?;
    for &d in &deltas {
        ctx.positive("delta_phi", d)?;
    }
    let seed = ctx.seed(0)?;
    r.seed = Some(seed);
    let cfg = optimizer(&a.opt, ctx, seed)?;
    let mode = select_mode(ctx, a.select.clone())?;
    let shard_dir = ctx.params.opt("shard_dir", a.shard_dir.as_ref().map(|p| p.display().to_string()))?;

    let mut manifest_params = ctx.params.resolved().clone();
    manifest_params.remove("shard_dir");
    let manifest = json!({ "command": "sweep-prior", "params": manifest_params, "seed": seed, "points": deltas });
    if let Some(dir) = &shard_dir {
        let dir = Path::new(dir);
        fs::create_dir_all(dir)?;
        let mpath = dir.join("manifest.json");
        if mpath.exists() {
            let old: Value = serde_json::from_str(&fs::read_to_string(&mpath)?)?;
            if old != manifest {
                return Err(ctx.bad("shard_dir", format!("{} holds a sweep with different parameters", dir.display())));
            }
        } else {
            write_json(&mpath, &manifest)?;
        }
    }

    let mut t = Table::new(
        "sweep",
        &["delta_phi", "partition", "bmse", "rbmse_over_delta_phi", "css_bmse", "gain", "gain_db", "oqi_bmse", "overhead_vs_oqi"],
    );
    let mut resumed = 0;
    let mut best: Option<(f64, f64)> = None;
    for (i, &d) in deltas.iter().enumerate() {
        let shard = shard_dir.as_ref().map(|s| Path::new(s).join(format!("point-{i:04}.json")));
        let cached = match &shard {
            Some(p) if p.exists() => {
                let v: Value = serde_json::from_str(&fs::read_to_string(p)?)?;
                (v["delta_phi"].as_f64() == Some(d)).then_some(v)
            }
            _ => None,
        };
        let rec = match cached {
            Some(v) => {
                resumed += 1;
                v
            }
            None => {
                let v = sweep_point(n, d, mode, &cfg)?;
                if let Some(p) = &shard {
                    let tmp = p.with_extension("json.tmp");
                    write_json(&tmp, &v)?;
                    fs::rename(&tmp, p)?;
                }
                v
            }
        };
        r.budget_limited |= rec["budget_limited"].as_bool().unwrap_or(false);
        let f = |k: &str| Cell::F(rec[k].as_f64().unwrap_or(f64::NAN));
        let gain = rec["gain"].as_f64().unwrap_or(f64::NAN);
        if best.is_none_or(|b| gain > b.1) {
            best = Some((d, gain));
        }
        t.push(vec![
            f("delta_phi"),
            Cell::S(rec["partition"].as_str().unwrap_or("").to_string()),
            f("bmse"),
            f("rbmse_over_delta_phi"),
            f("css_bmse"),
            f("gain"),
            f("gain_db"),
            f("oqi_bmse"),
            f("overhead_vs_oqi"),
        ]);
    }
    r.set("points", deltas.len());
    r.set("resumed", resumed);
    if let Some((d, g)) = best {
        r.set("max_gain_delta_phi", d);
        r.set("max_gain", g);
        r.set("max_gain_db", schemes::db(g));
    }
    r.tables.push(t);
    Ok(())
}

// ---------------------------------------------------------------- scaling

#[derive(Args, Debug, Clone)]
pub struct ScalingArgs {
    /// Qubit counts, comma separated
    #[arg(long)]
    pub ns: Option<String>,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Schemes: proposed, varying-block, varying-block-norot, fixed-block, bit-by-bit, oqi, css
    #[arg(long)]
    pub schemes: Option<String>,
    /// RBMSE reference for the overhead ratios: oqi or hl (π/N)
    #[arg(long)]
    pub reference: Option<String>,
    /// Partition selection for the proposed scheme: rank, all, or top:K
    #[arg(long)]
    pub select: Option<String>,
    #[command(flatten)]
    pub opt: OptArgs,
    /// Monte Carlo samples where a scheme is too large to enumerate
    #[arg(long)]
    pub samples: Option<usize>,
}

const SCHEMES: [&str; 7] = ["proposed", "varying-block", "varying-block-norot", "fixed-block", "bit-by-bit", "oqi", "css"];

fn varying_for(n: usize) -> Option<VaryingBlockConfig> {
    (0..8).map(VaryingBlockConfig::new).find(|c| c.n_total() == n)
}

fn fixed_for(n: usize) -> Option<FixedBlockConfig> {
    (0..6).map(FixedBlockConfig::new).find(|c| c.n_total() == n)
}

pub fn scaling(a: &ScalingArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let ns_spec = ctx.params.get("ns", a.ns.clone(), "9,26".to_string())?;
    let ns: Vec<usize> = ctx.list("ns", &ns_spec)?;
    for &n in &ns {
        ctx.count("ns", n)?;
    }
    let spec = PriorSpec::resolve(&a.prior, ctx)?;
    let sch = ctx.params.get("schemes", a.schemes.clone(), "proposed,varying-block,oqi".to_string())?;
    let sch: Vec<String> = ctx.list("schemes", &sch)?;
    if let Some(bad) = sch.iter().find(|s| !SCHEMES.contains(&s.as_str())) {
        return Err(ctx.bad("schemes", format!("unknown scheme {bad:?}; known: {}", SCHEMES.join(", "))));
    }
    let reference = ctx.params.get("reference", a.reference.clone(), "oqi".to_string())?;
    if !["oqi", "hl"].contains(&reference.as_str()) {
        return Err(ctx.bad("reference", format!("expected oqi or hl, got {reference:?}")));
    }
    let seed = ctx.seed(1)?;
    r.seed = Some(seed);
    let cfg = optimizer(&a.opt, ctx, seed)?;
    let mode = select_mode(ctx, a.select.clone())?;
    let samples = ctx.params.get("samples", a.samples, McConfig::default().samples)?;
    let mc = McConfig { samples: ctx.count("samples", samples)?, seed };

    let mut t = Table::new("scaling", &["n", "scheme", "bmse", "std_err", "rbmse", "n_times_rbmse", "ratio_to_reference", "detail"]);
    let mut per_scheme: std::collections::BTreeMap<String, (Vec<f64>, Vec<f64>)> = Default::default();
    let mut by_n: std::collections::BTreeMap<(usize, String), f64> = Default::default();
    for &n in &ns {
        let g = spec.grid(n)?;
        let q = oqi_bmse(n, &g)?;
        let ref_rbmse = if reference == "oqi" { q.sqrt() } else { PI / n as f64 };
        for s in &sch {
            let (est, detail): (Estimate, String) = match s.as_str() {
                "proposed" => {
                    let sel = adaptive::select_best_partition(n, &g, mode, &cfg)?;
                    r.budget_limited |= sel.budget_limited;
                    (Estimate::exact(sel.bmse), sel.partition.to_string())
                }
                "varying-block" | "varying-block-norot" => {
                    let Some(c) = varying_for(n) else {
                        r.notes.push(format!("{s}: no configuration has exactly {n} qubits"));
                        continue;
                    };
                    let rot = s == "varying-block";
                    (schemes::varying_block_bmse(&c, &g, rot, &mc)?, format!("k_max={}", c.k_max))
                }
                "fixed-block" | "bit-by-bit" => {
                    let Some(c) = fixed_for(n) else {
                        r.notes.push(format!("{s}: no configuration has exactly {n} qubits"));
                        continue;
                    };
                    let est = if s == "fixed-block" { schemes::Estimator::Bayes } else { schemes::Estimator::BitByBit };
                    (schemes::fixed_block_bmse(&c, &g, est, &mc), format!("k_max={} M={}", c.k_max, c.m))
                }
                "oqi" => (Estimate::exact(q), String::new()),
                _ => (Estimate::exact(schemes::css_bmse(n, &g)?), String::new()),
            };
            let rb = est.mean.sqrt();
            let e = per_scheme.entry(s.clone()).or_default();
            e.0.push(rb);
            e.1.push(ref_rbmse);
            by_n.insert((n, s.clone()), est.mean);
            t.push(vec![
                n.into(),
                s.as_str().into(),
                est.mean.into(),
                est.std_err.into(),
                rb.into(),
                (n as f64 * rb).into(),
                (rb / ref_rbmse).into(),
                detail.into(),
            ]);
        }
    }
    let mut overheads = serde_json::Map::new();
    for (s, (v, rf)) in &per_scheme {
        overheads.insert(s.clone(), json!(fit::overhead_constant(v, rf)?));
    }
    r.set("reference", reference.as_str());
    r.set("overhead", Value::Object(overheads));
    let mut adv = serde_json::Map::new();
    for &n in &ns {
        if let (Some(vb), Some(ps)) = (by_n.get(&(n, "varying-block".into())), by_n.get(&(n, "proposed".into()))) {
            adv.insert(n.to_string(), json!(vb / ps));
        }
    }
    if !adv.is_empty() {
        r.set("varying_block_over_proposed", Value::Object(adv));
    }
    r.tables.push(t);
    Ok(())
}

// ---------------------------------------------------------------- unwind

#[derive(Args, Debug, Clone)]
pub struct UnwindArgs {
    /// Gaussian prior width δφ (rad)
    #[arg(long)]
    pub delta_phi: Option<f64>,
    /// Qubit counts, comma separated
    #[arg(long)]
    pub ns: Option<String>,
    /// Baseline simulated: adaptive, nonadaptive or both
    #[arg(long)]
    pub mode: Option<String>,
    /// Monte Carlo samples
    #[arg(long)]
    pub samples: Option<usize>,
    /// Search the best mix of slow atoms and GHZ blocks instead of simulating
    #[arg(long)]
    pub best: bool,
    /// Let one qubit serve as several slow atoms (with --best or --rescale)
    #[arg(long)]
    pub reuse: bool,
    /// Deepest slow level searched by --best
    #[arg(long)]
    pub l_cap: Option<u32>,
    /// Rescale an extended partition such as 3x(1/8)+2x(1/4)+4x(1/2)+3x1
    #[arg(long)]
    pub rescale: Option<String>,
    /// Level used by --rescale; defaults to the partition's deepest level
    #[arg(long)]
    pub l_max: Option<u32>,
    #[command(flatten)]
    pub opt: OptArgs,
}

pub fn unwind(a: &UnwindArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    if let Some(s) = ctx.params.opt("rescale", a.rescale.clone())? {
        let reuse = ctx.params.flag("reuse", a.reuse)?;
        let ep: ExtendedPartition = s.parse().map_err(|e| ctx.bad("rescale", e))?;
        let ep = ep.with_reuse(reuse);
        let l = ctx.params.get("l_max", a.l_max, ep.l_max())?;
        let res = unwind::rescale(&ep, l).map_err(|e| ctx.bad("l_max", e))?;
        r.set("partition", ep.to_string());
        r.set("n_total", ep.n_total());
        r.set("rescaled", res.partition.to_string());
        r.set("n_prime", res.n_prime);
        r.set("scale_factor", res.scale_factor);
        r.set("prior_scale", res.prior_scale);
        let mut t = Table::new("rescaled", &["block_qubits", "copies"]);
        for &(k, m) in res.partition.blocks() {
            t.push(vec![(1usize << k).into(), (m as usize).into()]);
        }
        r.tables.push(t);
        return Ok(());
    }
    let d = ctx.params.get("delta_phi", a.delta_phi, 1.4)?;
    let d = ctx.positive("delta_phi", d)?;
    let ns_spec = ctx.params.get("ns", a.ns.clone(), "30,45,60".to_string())?;
    let ns: Vec<usize> = ctx.list("ns", &ns_spec)?;
    for &n in &ns {
        ctx.count("ns", n)?;
    }
    let seed = ctx.seed(1)?;
    r.seed = Some(seed);
    if ctx.params.flag("best", a.best)? {
        let reuse = ctx.params.flag("reuse", a.reuse)?;
        let l_cap = ctx.params.opt("l_cap", a.l_cap)?;
        let optimizer = optimizer(&a.opt, ctx, seed)?;
        let search = UnwindSearch { l_cap, optimizer, ..UnwindSearch::default() };
        let mut t = Table::new("best", &["n", "partition", "l_max", "bmse", "rbmse_over_delta_phi"]);
        for &n in &ns {
            let c = unwind::best_unwind_partition(n, d, reuse, &search)?;
            r.budget_limited |= c.budget_limited;
            t.push(vec![
                n.into(),
                c.partition.to_string().into(),
                (c.l_max as usize).into(),
                c.bmse.into(),
                (c.bmse.sqrt() / d).into(),
            ]);
        }
        r.tables.push(t);
        return Ok(());
    }
    let mode = ctx.params.get("mode", a.mode.clone(), "both".to_string())?;
    let modes: Vec<UnwindMode> = match mode.as_str() {
        "adaptive" => vec![UnwindMode::Adaptive],
        "nonadaptive" => vec![UnwindMode::NonAdaptive],
        "both" => vec![UnwindMode::Adaptive, UnwindMode::NonAdaptive],
        _ => return Err(ctx.bad("mode", format!("expected adaptive, nonadaptive or both, got {mode:?}"))),
    };
    let samples = ctx.params.get("samples", a.samples, McConfig::default().samples)?;
    let mc = McConfig { samples: ctx.count("samples", samples)?, seed };
    let g = prior::gaussian_for(d, 64)?;
    let mut t = Table::new(
        "unwind",
        &["n", "mode", "bmse", "std_err", "rbmse_over_delta_phi", "levels", "ghz_k_max", "p_error_rate", "stage_width"],
    );
    for &n in &ns {
        for &m in &modes {
            let (alloc, res): (UnwindAllocation, _) = unwind::best_allocation(n, &g, m, &mc)?;
            let levels = alloc.levels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("/");
            t.push(vec![
                n.into(),
                (if m == UnwindMode::Adaptive { "adaptive" } else { "nonadaptive" }).into(),
                res.bmse.mean.into(),
                res.bmse.std_err.into(),
                (res.bmse.mean.sqrt() / d).into(),
                levels.into(),
                (alloc.ghz.k_max as usize).into(),
                res.p_error_rate.into(),
                res.stage_width.unwrap_or(f64::NAN).into(),
            ]);
        }
    }
    r.set("levels_needed", unwind::levels_needed(d));
    r.tables.push(t);
    Ok(())
}

// ---------------------------------------------------------------- clock

#[derive(Args, Debug, Clone)]
pub struct ClockArgs {
    /// Protocols: uncorrelated, ghz, best-classical, oqc (comma separated)
    #[arg(long)]
    pub protocols: Option<String>,
    /// Number of atoms
    #[arg(long)]
    pub n: Option<usize>,
    /// Laser linewidth γ_LO
    #[arg(long)]
    pub gamma_lo: Option<f64>,
    /// Single-atom decay rate γ_ind
    #[arg(long)]
    pub gamma_ind: Option<f64>,
    /// Atomic angular frequency ω_A
    #[arg(long)]
    pub omega_a: Option<f64>,
    /// Averaging times: lo:hi:logK, lo:hi:linK or a comma list
    #[arg(long)]
    pub tau: Option<String>,
}

pub fn clock(a: &ClockArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let ps = ctx.params.get("protocols", a.protocols.clone(), "uncorrelated,ghz,best-classical,oqc".to_string())?;
    let protocols: Vec<Protocol> =
        ps.split(',').map(|s| s.trim().parse::<Protocol>()).collect::<Result<_, _>>().map_err(|e| ctx.bad("protocols", e))?;
    let n = ctx.params.get("n", a.n, 200usize)?;
    let n = ctx.count("n", n)?;
    let gamma_lo = ctx.params.get("gamma_lo", a.gamma_lo, 1.0)?;
    let gamma_ind = ctx.params.get("gamma_ind", a.gamma_ind, 1e-4)?;
    let omega_a = ctx.params.get("omega_a", a.omega_a, 1.0)?;
    let tau_spec = ctx.params.get("tau", a.tau.clone(), "0.01:1000:log41".to_string())?;
    let taus = ctx.grid("tau", &tau_spec)?;
    for &x in &taus {
        ctx.positive("tau", x)?;
    }
    let mut t = Table::new("allan", &["tau", "T_opt", "sigma_y", "protocol", "N"]);
    for &p in &protocols {
        let cfg = ClockConfig { gamma_lo, gamma_ind, omega_a, n_atoms: n, protocol: p };
        let model = ClockModel::new(cfg).map_err(|e| ctx.bad("clock", e))?;
        for &tau in &taus {
            let pt = model.allan(tau)?;
            t.push(vec![tau.into(), pt.t_opt.into(), pt.sigma_y.into(), p.name().into(), n.into()]);
        }
    }
    let mut lim = Table::new("limit", &["tau", "sigma_limit"]);
    for &tau in &taus {
        lim.push(vec![tau.into(), clock::fundamental_limit(tau, n, gamma_ind, omega_a).into()]);
    }
    r.tables.push(t);
    r.tables.push(lim);
    Ok(())
}

// ---------------------------------------------------------------- noise

#[derive(Args, Debug, Clone)]
pub struct NoiseCmdArgs {
    /// Total number of qubits
    #[arg(long)]
    pub n: Option<usize>,
    /// Gaussian prior width δφ (rad)
    #[arg(long)]
    pub delta_phi: Option<f64>,
    /// Partition; defaults to the optimal-measurement ranking winner
    #[arg(long)]
    pub partition: Option<String>,
    /// Largest block exponent considered when ranking
    #[arg(long)]
    pub k_cap: Option<u32>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Rotations: reoptimized under noise, or fixed at the noiseless optimum
    #[arg(long)]
    pub rotations: Option<String>,
    /// Sweep axis for a gain-decay fit: f0 or p-e
    #[arg(long)]
    pub sweep: Option<String>,
    /// Sweep values: lo:hi:linK or a comma list
    #[arg(long)]
    pub values: Option<String>,
    #[command(flatten)]
    pub opt: OptArgs,
}

pub fn noise(a: &NoiseCmdArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let n = ctx.required("n", a.n)?;
    let n = ctx.count("n", n)?;
    let d = ctx.params.get("delta_phi", a.delta_phi, 0.7)?;
    let d = ctx.positive("delta_phi", d)?;
    let part = ctx.params.opt("partition", a.partition.clone())?;
    let k_cap = ctx.params.opt("k_cap", a.k_cap)?;
    let nm = noise_model(&a.noise, ctx)?;
    let rot = ctx.params.get("rotations", a.rotations.clone(), "reoptimized".to_string())?;
    if !["reoptimized", "fixed"].contains(&rot.as_str()) {
        return Err(ctx.bad("rotations", format!("expected reoptimized or fixed, got {rot:?}")));
    }
    let sweep = ctx.params.opt("sweep", a.sweep.clone())?;
    let axis = match sweep.as_deref() {
        None => None,
        Some("f0") => Some(DecayAxis::Fidelity),
        Some("p-e") => Some(DecayAxis::BitFlip),
        Some(o) => return Err(ctx.bad("sweep", format!("expected f0 or p-e, got {o:?}"))),
    };
    let values = match axis {
        Some(DecayAxis::Fidelity) => ctx.params.get("values", a.values.clone(), "1,0.99,0.98,0.97,0.96,0.95".to_string())?,
        Some(DecayAxis::BitFlip) => ctx.params.get("values", a.values.clone(), "0,0.005,0.01,0.015,0.02,0.025".to_string())?,
        None => String::new(),
    };
    let seed = ctx.seed(0)?;
    r.seed = Some(seed);
    let cfg = optimizer(&a.opt, ctx, seed)?;

    let g = prior::gaussian_for(d, n)?;
    let p: Partition = match part {
        Some(s) => {
            let p: Partition = s.parse().map_err(|e| ctx.bad("partition", e))?;
            if p.n_total() != n {
                return Err(ctx.bad("partition", format!("{p} has {} qubits, expected {n}", p.n_total())));
            }
            p
        }
        None => {
            let (p, limited) = ranked_winner(n, &g, k_cap)?;
            r.budget_limited |= limited;
            p
        }
    };
    let css = schemes::css_bmse(n, &g)?;
    let clean = adaptive::optimize_plan(&adaptive::initial_plan(&p, &g)?, &g, &cfg);
    r.set("partition", p.to_string());
    r.set("css_bmse", css);
    r.set("noiseless_bmse", clean.bmse);
    r.set("noiseless_gain", css / clean.bmse);

    let eval = |nm: &NoiseModel, start: &MeasurementPlan, cfg: &OptimizerConfig| -> (f64, MeasurementPlan) {
        if rot == "fixed" {
            (noise::noisy_plan_bmse(&clean.plan, &g, nm), clean.plan.clone())
        } else {
            let o = noise::optimize_noisy(start, &g, nm, cfg);
            (o.bmse, o.plan)
        }
    };
    let Some(axis) = axis else {
        let (b, _) = eval(&nm, &clean.plan, &cfg);
        let gain = css / b;
        r.set("bmse", b);
        r.set("gain", gain);
        r.set("gain_db", schemes::db(gain));
        let mut t = Table::new("contrast", &["block_qubits", "contrast"]);
        for &(k, _) in p.blocks() {
            t.push(vec![(1usize << k).into(), nm.contrast(1 << k).into()]);
        }
        r.tables.push(t);
        return Ok(());
    };
    let xs = ctx.grid("values", &values)?;
    let warm = OptimizerConfig { restarts: 1, ..cfg.clone() };
    let mut plan = clean.plan.clone();
    let mut pts = Vec::new();
    let mut t = Table::new("decay", &["value", "bmse", "gain", "gain_db"]);
    for &x in &xs {
        let m = match axis {
            DecayAxis::Fidelity => NoiseModel::new(nm.p_a, nm.p_e, x),
            DecayAxis::BitFlip => NoiseModel::new(nm.p_a, x, nm.f0),
        }
        .map_err(|e| ctx.bad("values", e))?;
        let (b, next) = eval(&m, &plan, &warm);
        plan = next;
        let gain = css / b;
        pts.push((x, gain));
        t.push(vec![x.into(), b.into(), gain.into(), schemes::db(gain).into()]);
    }
    let (amp, rate) = noise::fit_gain_decay(&pts, axis).map_err(|e| ctx.bad("values", e))?;
    r.set("fit_a", amp);
    r.set("fit_b", rate);
    r.tables.push(t);
    Ok(())
}

// ---------------------------------------------------------------- plateau

#[derive(Args, Debug, Clone)]
pub struct PlateauArgs {
    /// Prior widths: lo:hi:logK, lo:hi:linK or a comma list
    #[arg(long)]
    pub delta_phi: Option<String>,
    /// Also evaluate CSS and OQI at this qubit count
    #[arg(long)]
    pub n: Option<usize>,
}

pub fn plateau(a: &PlateauArgs, ctx: &mut Ctx, r: &mut Report) -> Result<(), CliError> {
    let spec = ctx.params.get("delta_phi", a.delta_phi.clone(), "0.1:3.0:log15".to_string())?;
    let ds = ctx.grid("delta_phi", &spec)?;
    for &d in &ds {
        ctx.positive("delta_phi", d)?;
    }
    let n = ctx.params.opt("n", a.n)?;
    let mut cols = vec!["delta_phi", "plateau_hl", "plateau_sql"];
    if n.is_some() {
        cols.extend(["css_bmse", "oqi_bmse", "css_over_sql", "oqi_over_hl"]);
    }
    let mut t = Table::new("plateau", &cols);
    for &d in &ds {
        let (hl, sql) = (schemes::plateau_hl(d), schemes::plateau_sql(d));
        let mut row: Vec<Cell> = vec![d.into(), hl.into(), sql.into()];
        if let Some(n) = n {
            let n = ctx.count("n", n)?;
            let g = prior::gaussian_for(d, n)?;
            let css = schemes::css_bmse(n, &g)?;
            let q = oqi_bmse(n, &g)?;
            row.extend([css.into(), q.into(), (css / sql).into(), (q / hl).into()]);
        }
        t.push(row);
    }
    r.tables.push(t);
    Ok(())
}
