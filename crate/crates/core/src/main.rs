use std::error::Error;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Deserializer};
use serde_json::{json, Value};

use plent::branch::{branch_counts_capped, BranchError, DEFAULT_ARC_CAP};
use plent::entropy::{
    bracket_theorem_main, entropy_estimate_capped, find_horseshoe, largest_horseshoe, verify_horseshoe, DEFAULT_ORBIT_CAP,
};
use plent::families::FamilySpec;
use plent::invlim::{appendix_report, check_diagonal_compat, entropy_estimate_diagonal, DiagonalParams, DiagonalSystem, GridSeed, SystemSpec};
use plent::plmap::{entropy_lap_growth_capped, DEFAULT_BREAKPOINT_CAP};
use plent::relation::{commutation_witness, commutes, compose_rel, param_graph, PLRelation};
use plent::{r, PLMap, Rat};

#[derive(Parser)]
#[command(name = "plent", version, about = "Exact entropy experiments for piecewise-linear maps and relations")]
struct Cli {
    /// JSON experiment config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on breakpoints of iterates and on arcs of branch families.
    #[arg(long, global = true)]
    cap_breakpoints: Option<usize>,
    /// Cap on enumerated grid orbits.
    #[arg(long, global = true)]
    cap_orbits: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact commutation and strong commutation of two maps.
    CommuteCheck(Params),
    /// Sizes of the consistent-arc families M_k.
    Branches(Params),
    /// Largest (or requested) certified horseshoe of a relation or its power.
    Horseshoe(Params),
    /// Certified entropy bracket for the tent pair (n, m).
    Bracket(Params),
    /// Lap-growth entropy of a single map.
    EntropyMap(Params),
    /// Separated/spanning estimates for a relation on grid orbits.
    EntropyRel(Params),
    /// Estimates for a diagonal map on a truncated inverse limit.
    Invlim(Params),
    /// The block-assembled system: compatibility, per-level bounds, lifting failure.
    Appendix(Params),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CommuteCheck(_) => "commute-check",
            Command::Branches(_) => "branches",
            Command::Horseshoe(_) => "horseshoe",
            Command::Bracket(_) => "bracket",
            Command::EntropyMap(_) => "entropy-map",
            Command::EntropyRel(_) => "entropy-rel",
            Command::Invlim(_) => "invlim",
            Command::Appendix(_) => "appendix",
        }
    }

    fn params(self) -> Params {
        match self {
            Command::CommuteCheck(p)
            | Command::Branches(p)
            | Command::Horseshoe(p)
            | Command::Bracket(p)
            | Command::EntropyMap(p)
            | Command::EntropyRel(p)
            | Command::Invlim(p)
            | Command::Appendix(p) => p,
        }
    }
}

/// Family specs in a config may be short strings or JSON objects.
fn spec_text<'de, D: Deserializer<'de>>(de: D) -> Result<Option<String>, D::Error> {
    Ok(match Option::<Value>::deserialize(de)? {
        None => None,
        Some(Value::String(s)) => Some(s),
        Some(v) => Some(v.to_string()),
    })
}

#[derive(Args, Deserialize, Default, Clone, Debug)]
#[serde(default, deny_unknown_fields)]
struct Params {
    /// First map (bonding map for invlim): short form like `tent:3` or a JSON spec.
    #[arg(long)]
    #[serde(deserialize_with = "spec_text")]
    f: Option<String>,
    /// Second map (diagonal map for invlim).
    #[arg(long)]
    #[serde(deserialize_with = "spec_text")]
    g: Option<String>,
    /// Relation JSON file, used instead of --f/--g.
    #[arg(long)]
    rel: Option<PathBuf>,
    /// Inverse-system JSON file.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Use the shift of --f (diagonal maps f∘f).
    #[arg(long)]
    shift: bool,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    nmax: Option<usize>,
    /// Deepest iterate for blockwise branch bounds.
    #[arg(long)]
    kb: Option<usize>,
    /// Power of the relation to search.
    #[arg(long)]
    power: Option<usize>,
    /// Requested horseshoe size.
    #[arg(long)]
    size: Option<usize>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    grid: Option<Rat>,
    #[arg(long)]
    s: Option<Rat>,
    #[arg(long, value_delimiter = ',')]
    nseq: Option<Vec<u32>>,
    #[arg(long)]
    depth: Option<usize>,
    /// Component level estimated alongside the diagonal map.
    #[arg(long)]
    level: Option<usize>,
    /// `base` or `top`.
    #[arg(long)]
    seed: Option<String>,
}

macro_rules! overlay {
    ($a:ident, $b:ident; $($f:ident),*) => {
        Params { shift: $a.shift || $b.shift, $($f: $a.$f.or($b.$f)),* }
    };
}

impl Params {
    fn over(self, base: Params) -> Params {
        overlay!(self, base; f, g, rel, system, n, m, kmax, nmax, kb, power, size, eps, grid, s, nseq, depth, level, seed)
    }
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct Config {
    command: Option<String>,
    out: Option<PathBuf>,
    cap_breakpoints: Option<usize>,
    cap_orbits: Option<usize>,
    params: Params,
}

struct Ctx {
    p: Params,
    cap_breakpoints: Option<usize>,
    cap_orbits: Option<usize>,
}

#[derive(Default)]
struct Outcome {
    summary: Value,
    failures: Vec<String>,
    artifacts: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn json(&mut self, name: &str, v: &impl serde::Serialize) -> Result<(), Box<dyn Error>> {
        self.artifacts.push((name.to_string(), serde_json::to_vec_pretty(v)?));
        Ok(())
    }
}

type Res = Result<Outcome, Box<dyn Error>>;

fn map_arg(spec: &Option<String>, flag: &str) -> Result<PLMap, Box<dyn Error>> {
    let s = spec.as_deref().ok_or_else(|| format!("--{flag} is required"))?;
    Ok(FamilySpec::parse(s)?.build()?)
}

fn relation_arg(p: &Params) -> Result<PLRelation, Box<dyn Error>> {
    match &p.rel {
        Some(path) => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
        None => Ok(param_graph(&map_arg(&p.f, "f")?, &map_arg(&p.g, "g")?)?),
    }
}

fn commute_check(c: &Ctx) -> Res {
    let (f, g) = (map_arg(&c.p.f, "f")?, map_arg(&c.p.g, "g")?);
    let w = commutation_witness(&f, &g)?;
    let plain = commutes(&f, &g)?;
    let mut out = Outcome { summary: json!({ "commutes": plain, "strongly_commutes": w.holds }), ..Default::default() };
    if !w.holds {
        out.failures.push("g∘f⁻¹ and f⁻¹∘g differ".into());
    }
    out.json("commute.json", &w)?;
    Ok(out)
}

fn branches(c: &Ctx) -> Res {
    let (f, g) = (map_arg(&c.p.f, "f")?, map_arg(&c.p.g, "g")?);
    let k_max = c.p.kmax.unwrap_or(8);
    let mut out = Outcome::default();
    let counts = match branch_counts_capped(&f, &g, k_max, c.cap_breakpoints.unwrap_or(DEFAULT_ARC_CAP)) {
        Ok(v) => v,
        Err(BranchError::ArcCap { cap, level, partial }) => {
            out.failures.push(format!("arc cap {cap} exceeded at level {level}"));
            partial
        }
        Err(e) => return Err(e.into()),
    };
    for b in counts.iter().filter(|b| !b.within_bound) {
        out.failures.push(format!("|M_{}| = {} exceeds {}", b.k, b.count, b.bound));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "count", "log_growth", "bound", "within_bound"])?;
    for b in &counts {
        w.write_record([b.k.to_string(), b.count.to_string(), b.log_growth.to_string(), b.bound.to_string(), b.within_bound.to_string()])?;
    }
    out.artifacts.push(("branches.csv".into(), w.into_inner()?));
    out.summary = json!({ "counts": counts.iter().map(|b| b.count).collect::<Vec<_>>() });
    out.json("branches.json", &counts)?;
    Ok(out)
}

fn horseshoe(c: &Ctx) -> Res {
    let base = relation_arg(&c.p)?;
    let mut rel = base.clone();
    for _ in 1..c.p.power.unwrap_or(1) {
        rel = compose_rel(&base, &rel)?;
    }
    let cert = match c.p.size {
        Some(n) => find_horseshoe(&rel, n),
        None => largest_horseshoe(&rel),
    };
    let mut out = Outcome::default();
    match &cert {
        Some(h) => {
            if !verify_horseshoe(&rel, &h.intervals) {
                out.failures.push("certificate failed re-verification".into());
            }
            out.summary = json!({ "n": h.n, "log_n": (h.n as f64).ln(), "intervals": h.intervals });
        }
        None => {
            out.failures.push("no horseshoe found".into());
            out.summary = json!({ "n": 0 });
        }
    }
    out.json("horseshoe.json", &cert)?;
    Ok(out)
}

fn bracket(c: &Ctx) -> Res {
    let (n, m) = (c.p.n.ok_or("--n is required")?, c.p.m.ok_or("--m is required")?);
    let rep = bracket_theorem_main(n, m, c.p.kmax.unwrap_or(8))?;
    let mut out = Outcome { summary: json!({ "target": rep.target, "lower": rep.lower, "upper": rep.upper, "ok": rep.ok }), ..Default::default() };
    for row in rep.rows.iter().filter(|r| !r.ok) {
        out.failures.push(format!("k={}: target outside [{}, {}]", row.k, row.lower, row.upper));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "horseshoe", "lower", "branches", "upper", "ok"])?;
    for row in &rep.rows {
        w.write_record([
            row.k.to_string(),
            row.horseshoe.to_string(),
            row.lower.to_string(),
            row.branches.to_string(),
            row.upper.to_string(),
            row.ok.to_string(),
        ])?;
    }
    out.artifacts.push(("bracket.csv".into(), w.into_inner()?));
    out.json("bracket.json", &rep)?;
    Ok(out)
}

fn entropy_map(c: &Ctx) -> Res {
    let f = map_arg(&c.p.f, "f")?;
    let lg = entropy_lap_growth_capped(&f, c.p.nmax.unwrap_or(8), c.cap_breakpoints.unwrap_or(DEFAULT_BREAKPOINT_CAP))?;
    let mut out = Outcome {
        summary: json!({ "terms": lg.terms, "core_slope": lg.core_slope, "exact": lg.exact }),
        ..Default::default()
    };
    out.json("entropy_map.json", &lg)?;
    Ok(out)
}

fn entropy_rel(c: &Ctx) -> Res {
    let rel = relation_arg(&c.p)?;
    let eps = c.p.eps.clone().unwrap_or_else(|| vec![0.25, 0.125, 0.0625]);
    let grid = c.p.grid.clone().unwrap_or_else(|| r(1, 64));
    let table = entropy_estimate_capped(&rel, &eps, c.p.nmax.unwrap_or(6), &grid, c.cap_orbits.unwrap_or(DEFAULT_ORBIT_CAP))?;
    let mut out = Outcome::default();
    if !table.monotone_in_eps {
        out.failures.push("exact separated counts decrease as eps shrinks".into());
    }
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    out.artifacts.push(("entropy_rel.csv".into(), buf));
    out.summary = json!({ "rows": table.rows.len(), "last_estimate": table.rows.last().map(|r| r.estimate) });
    out.json("entropy_rel.json", &table)?;
    Ok(out)
}

fn invlim(c: &Ctx) -> Res {
    let depth = c.p.depth.unwrap_or(8);
    let n_max = c.p.nmax.unwrap_or(10);
    let levels = depth + n_max + 1;
    let sys = match (&c.p.system, c.p.shift) {
        (Some(path), _) => serde_json::from_str::<SystemSpec>(&fs::read_to_string(path)?)?.build(levels)?,
        (None, true) => DiagonalSystem::shift(&map_arg(&c.p.f, "f")?, levels)?,
        (None, false) => DiagonalSystem::constant(&map_arg(&c.p.f, "f")?, &map_arg(&c.p.g, "g")?, levels),
    };
    let compat = check_diagonal_compat(&sys, sys.levels())?;
    let mut out = Outcome::default();
    if !compat.ok {
        out.failures.push(format!("compatibility fails at levels {:?}", compat.failed));
        out.summary = json!({ "compat": compat });
        return Ok(out);
    }
    let seed = match c.p.seed.as_deref() {
        None | Some("base") => GridSeed::Base,
        Some("top") => GridSeed::Top,
        Some(other) => return Err(format!("unknown seed {other:?}").into()),
    };
    let params = DiagonalParams {
        depth,
        n_max,
        eps: c.p.eps.as_ref().and_then(|e| e.first().copied()).unwrap_or(1.0 / 16.0),
        grid: c.p.grid.clone().unwrap_or_else(|| r(1, 256)),
        seed,
        psi_level: c.p.level,
        orbit_cap: c.cap_orbits.unwrap_or(20_000),
    };
    let est = entropy_estimate_diagonal(&sys, &params)?;
    let mut buf = Vec::new();
    est.write_csv(&mut buf)?;
    out.artifacts.push(("invlim.csv".into(), buf));
    out.summary = json!({ "compat": compat, "estimate": est.diagonal_estimate(), "tail_bound": 2f64.powi(-(depth as i32)) });
    out.json("invlim.json", &est)?;
    Ok(out)
}

fn appendix(c: &Ctx) -> Res {
    let n_seq = c.p.nseq.clone().unwrap_or_else(|| vec![2, 5, 2, 5]);
    let s = c.p.s.clone().unwrap_or_else(|| r(2, 1));
    let rep = appendix_report(&n_seq, &s, c.p.kmax.unwrap_or(3), c.p.kb.unwrap_or(8), &c.p.grid.clone().unwrap_or_else(|| r(1, 64)))?;
    let mut out = Outcome::default();
    if !rep.compat.ok {
        out.failures.push(format!("compatibility fails at levels {:?}", rep.compat.failed));
    }
    for l in rep.levels.iter().filter(|l| !l.ok) {
        out.failures.push(format!("level {}: lower {} / upper {} against target {}", l.k, l.lower, l.upper, l.target));
    }
    if rep.lift_failure.is_none() {
        out.failures.push("every tested orbit lifted".into());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "n_k", "target", "horseshoe", "lower", "first_block_lower", "upper", "allowance", "ok"])?;
    for l in &rep.levels {
        w.write_record([
            l.k.to_string(),
            l.n_k.to_string(),
            l.target.to_string(),
            l.horseshoe.as_ref().map_or(0, |h| h.n).to_string(),
            l.lower.to_string(),
            l.first_block_lower.to_string(),
            l.upper.to_string(),
            l.allowance.to_string(),
            l.ok.to_string(),
        ])?;
    }
    out.artifacts.push(("appendix.csv".into(), w.into_inner()?));
    out.summary = json!({
        "compat": rep.compat.ok,
        "lifting_condition": rep.lifting_condition.ok,
        "levels": rep.levels.iter().map(|l| json!({ "k": l.k, "lower": l.lower, "upper": l.upper, "target": l.target })).collect::<Vec<_>>(),
        "lift_failure": rep.lift_failure,
    });
    out.json("appendix.json", &rep)?;
    Ok(out)
}

fn init_threads() -> Result<(), Box<dyn Error>> {
    if let Ok(v) = std::env::var("PLENT_THREADS") {
        let n: usize = v.parse().map_err(|_| format!("PLENT_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn write_artifacts(dir: &Path, artifacts: &[(String, Vec<u8>)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in artifacts {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn parse_command(name: &str) -> Result<Command, Box<dyn Error>> {
    let p = Params::default();
    Ok(match name {
        "commute-check" => Command::CommuteCheck(p),
        "branches" => Command::Branches(p),
        "horseshoe" => Command::Horseshoe(p),
        "bracket" => Command::Bracket(p),
        "entropy-map" => Command::EntropyMap(p),
        "entropy-rel" => Command::EntropyRel(p),
        "invlim" => Command::Invlim(p),
        "appendix" => Command::Appendix(p),
        _ => return Err(format!("unknown command {name:?}").into()),
    })
}

fn report(command: &str, status: &str, out: Option<&Path>, body: Value) -> ExitCode {
    let v = json!({ "command": command, "status": status, "result": body });
    let text = serde_json::to_string_pretty(&v).expect("json values serialize");
    let _ = writeln!(std::io::stdout(), "{text}");
    if let Some(dir) = out {
        if status != "ok" {
            let _ = write_artifacts(dir, &[("failure.json".into(), text.into_bytes())]);
        }
    }
    match status {
        "ok" => ExitCode::SUCCESS,
        "failed" => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg: Config = match &cli.config {
        Some(path) => match fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string())) {
            Ok(c) => c,
            Err(e) => return report("config", "error", None, json!({ "error": format!("{}: {e}", path.display()) })),
        },
        None => Config::default(),
    };
    let out_dir = cli.out.clone().or(cfg.out.clone());
    let command = match cli.command {
        Some(c) => c,
        None => match cfg.command.as_deref().map(parse_command) {
            Some(Ok(c)) => c,
            Some(Err(e)) => return report("config", "error", out_dir.as_deref(), json!({ "error": e.to_string() })),
            None => return report("config", "error", None, json!({ "error": "no command given" })),
        },
    };
    if let Err(e) = init_threads() {
        return report(command.name(), "error", out_dir.as_deref(), json!({ "error": e.to_string() }));
    }
    let name = command.name();
    let ctx = Ctx {
        p: command.params().over(cfg.params),
        cap_breakpoints: cli.cap_breakpoints.or(cfg.cap_breakpoints),
        cap_orbits: cli.cap_orbits.or(cfg.cap_orbits),
    };
    let result = match name {
        "commute-check" => commute_check(&ctx),
        "branches" => branches(&ctx),
        "horseshoe" => horseshoe(&ctx),
        "bracket" => bracket(&ctx),
        "entropy-map" => entropy_map(&ctx),
        "entropy-rel" => entropy_rel(&ctx),
        "invlim" => invlim(&ctx),
        _ => appendix(&ctx),
    };
    match result {
        Err(e) => report(name, "error", out_dir.as_deref(), json!({ "error": e.to_string() })),
        Ok(o) => {
            if let Some(dir) = &out_dir {
                if let Err(e) = write_artifacts(dir, &o.artifacts) {
                    return report(name, "error", None, json!({ "error": e.to_string() }));
                }
            }
            if o.failures.is_empty() {
                report(name, "ok", None, o.summary)
            } else {
                report(name, "failed", out_dir.as_deref(), json!({ "failures": o.failures, "summary": o.summary }))
            }
        }
    }
}
