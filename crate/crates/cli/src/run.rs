//! Task execution. Every task returns its artifacts in memory; the caller is the single writer.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use symhom::dynamics::{FlowConfig, HamiltonianSpec};
use symhom::genfunc::{Axis, GeneratingLandscape, LandscapeCache};
use symhom::measures::{build_mu_alpha, emit_r_set, returning_rotations, support_checks};
use symhom::selector::{capacities, homogenize, HomogenizeOptions, SelectorTable};
use symhom::subdiff::{clarke_pl, limit_diff, strong_diff, SubdiffPolytope};

use crate::census::census;
use crate::config::{RunConfig, Task};
use crate::CliError;

/// A named output file.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: impl Into<String>, body: String) -> Self {
        Artifact { name: name.into(), bytes: body.into_bytes() }
    }

    fn json(name: impl Into<String>, value: &impl Serialize) -> Self {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        Artifact::text(name, s)
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

/// Fully resolved inputs of one run.
pub struct Job {
    pub task: Task,
    pub config: RunConfig,
    pub hamiltonian: HamiltonianSpec,
    /// Landscape cache directory, when caching is on.
    pub cache_dir: Option<std::path::PathBuf>,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.12e}")
    }
}

fn homogenize_options(job: &Job) -> Result<HomogenizeOptions, CliError> {
    let cache = match &job.cache_dir {
        Some(d) => Some(LandscapeCache::new(d)?),
        None => None,
    };
    Ok(HomogenizeOptions { landscape: job.config.grids.landscape.apply(), cache, ..Default::default() })
}

fn tables(job: &Job) -> Result<(Vec<SelectorTable>, Vec<Artifact>), CliError> {
    let p_grid = job.config.grids.p_grid();
    let (tables, report) = homogenize(&job.hamiltonian, &job.config.k_list, &p_grid, &homogenize_options(job)?)?;
    let mut combined = String::from("p");
    for t in &tables {
        combined.push_str(&format!(",h_{}", t.k));
    }
    combined.push_str(",extrapolated\n");
    for (i, p) in p_grid.iter().enumerate() {
        combined.push_str(&fmt(*p));
        for t in &tables {
            combined.push(',');
            combined.push_str(&fmt(t.values[i]));
        }
        combined.push(',');
        combined.push_str(&fmt(report.extrapolated[i]));
        combined.push('\n');
    }
    let mut out = vec![Artifact::text("homogenized.csv", combined), Artifact::json("convergence.json", &report)];
    for t in &tables {
        out.push(Artifact::text(format!("h_k{}.csv", t.k), t.to_csv()));
    }
    Ok((tables, out))
}

fn table_function(t: &SelectorTable) -> GeneratingLandscape {
    let n = t.p_grid.len();
    let step = (t.p_grid[n - 1] - t.p_grid[0]) / (n - 1) as f64;
    let axes = vec![Axis { lo: t.p_grid[0], step, nodes: n, periodic: false }];
    GeneratingLandscape::from_values(axes, t.values.clone(), 0, vec![false; n])
}

fn interval(p: &SubdiffPolytope) -> (f64, f64) {
    p.vertices.iter().fold((f64::NAN, f64::NAN), |(lo, hi), v| (lo.min(v[0]), hi.max(v[0])))
}

fn run_orbits(job: &Job) -> Result<Vec<Artifact>, CliError> {
    let h = &job.hamiltonian;
    let cfg = FlowConfig::for_spec(h);
    let p_grid = job.config.grids.p_grid();
    let mut rows = String::from("k,p,rotation\n");
    let mut hull = String::from("k,p,rotation_min,rotation_max,count\n");
    for &k in &job.config.k_list {
        let found: Vec<Vec<f64>> =
            p_grid.par_iter().map(|&p| returning_rotations(h, p, k, &cfg)).collect::<symhom::Result<_>>()?;
        for (p, rots) in p_grid.iter().zip(&found) {
            for r in rots {
                rows.push_str(&format!("{k},{},{}\n", fmt(*p), fmt(*r)));
            }
            let (lo, hi) = rots.iter().fold((f64::NAN, f64::NAN), |(a, b), &r| (a.min(r), b.max(r)));
            hull.push_str(&format!("{k},{},{},{},{}\n", fmt(*p), fmt(lo), fmt(hi), rots.len()));
        }
    }
    Ok(vec![Artifact::text("orbits.csv", rows), Artifact::text("orbit_hull.csv", hull)])
}

fn run_subdiff(job: &Job) -> Result<Vec<Artifact>, CliError> {
    let h = &job.hamiltonian;
    let cfg = FlowConfig::for_spec(h);
    let (tabs, mut out) = tables(job)?;
    let mut csv = String::from(
        "k,p,value,uncertainty,clarke_lo,clarke_hi,limit_lo,limit_hi,strong_lo,strong_hi,strong_degenerate,\
         rotation_lo,rotation_hi,rotation_count,slope_jump\n",
    );
    for t in &tabs {
        let f = table_function(t);
        let step = f.axes[0].step;
        let n = t.p_grid.len();
        let slope = |i: usize| (t.values[i + 1] - t.values[i]) / step;
        let rows: Vec<String> = (1..n - 1)
            .into_par_iter()
            .map(|i| -> Result<String, CliError> {
                let p = t.p_grid[i];
                let clarke = clarke_pl(&f, &[p])?;
                let (clo, chi) = interval(&clarke);
                let cands: Vec<Vec<f64>> = (0..=8).map(|j| vec![clo + (chi - clo) * j as f64 / 8.0]).collect();
                let strong = strong_diff(&f, &[p], &cands);
                let limit = limit_diff(&f, &[p], &[0.5 * step], &cands)?;
                let (slo, shi) = interval(&strong);
                let (llo, lhi) = interval(&limit);
                let rots = returning_rotations(h, p, t.k, &cfg)?;
                let (rlo, rhi) = rots.iter().fold((f64::NAN, f64::NAN), |(a, b), &r| (a.min(r), b.max(r)));
                let jump = (slope(i) - slope(i - 1))
                    .abs()
                    .max(if i >= 2 { (slope(i - 1) - slope(i - 2)).abs() } else { 0.0 })
                    .max(if i + 2 < n { (slope(i + 1) - slope(i)).abs() } else { 0.0 });
                Ok(format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    t.k,
                    fmt(p),
                    fmt(t.values[i]),
                    fmt(t.uncertainty[i]),
                    fmt(clo),
                    fmt(chi),
                    fmt(llo),
                    fmt(lhi),
                    fmt(slo),
                    fmt(shi),
                    strong.degenerate,
                    fmt(rlo),
                    fmt(rhi),
                    rots.len(),
                    fmt(jump)
                ))
            })
            .collect::<Result<_, _>>()?;
        csv.extend(rows);
    }
    out.push(Artifact::text("subdiff.csv", csv));
    Ok(out)
}

#[derive(Serialize)]
struct PieceSummary {
    weight: f64,
    q0: Vec<f64>,
    p0: Vec<f64>,
    horizon: f64,
    average_action: f64,
}

#[derive(Serialize)]
struct MeasureRecord {
    k: usize,
    p: f64,
    alpha: f64,
    status: String,
    rotation: Option<f64>,
    avg_action: Option<f64>,
    invariance_defect: Option<f64>,
    support: Option<symhom::measures::SupportReport>,
    pieces: Vec<PieceSummary>,
}

fn run_measures(job: &Job) -> Result<Vec<Artifact>, CliError> {
    let h = &job.hamiltonian;
    let cfg = FlowConfig::for_spec(h);
    let mut jobs = Vec::new();
    for &k in &job.config.k_list {
        for req in &job.config.measures {
            for &a in &req.alphas {
                jobs.push((k, req, a));
            }
        }
    }
    let records: Vec<MeasureRecord> = jobs
        .par_iter()
        .map(|&(k, req, alpha)| -> Result<MeasureRecord, CliError> {
            let hull_pts = req.hull.clone().unwrap_or_else(|| req.alphas.clone());
            let hull = SubdiffPolytope {
                vertices: hull_pts.iter().map(|&a| vec![a]).collect(),
                at: vec![req.p],
                degenerate: false,
            };
            let mut rec = MeasureRecord {
                k,
                p: req.p,
                alpha,
                status: "ok".into(),
                rotation: None,
                avg_action: None,
                invariance_defect: None,
                support: None,
                pieces: Vec::new(),
            };
            match build_mu_alpha(h, &[alpha], &[req.p], k, &hull, &cfg) {
                Ok(mu) => {
                    rec.rotation = Some(mu.rotation[0]);
                    rec.avg_action = Some(mu.avg_action);
                    rec.invariance_defect = Some(mu.invariance_defect);
                    rec.support = Some(support_checks(&mu, h));
                    rec.pieces = mu
                        .pieces
                        .iter()
                        .map(|pc| {
                            let z = pc.orbit.start();
                            PieceSummary {
                                weight: pc.weight,
                                q0: z.q().to_vec(),
                                p0: z.p().to_vec(),
                                horizon: pc.orbit.horizon,
                                average_action: pc.orbit.average_action(),
                            }
                        })
                        .collect();
                }
                Err(e @ (symhom::Error::NoOrbitFound { .. } | symhom::Error::InfeasibleAlpha { .. })) => {
                    rec.status = e.to_string();
                }
                Err(e) => return Err(e.into()),
            }
            Ok(rec)
        })
        .collect::<Result<_, _>>()?;
    let mut csv = String::from(
        "k,p,alpha,status,rotation,avg_action,invariance_defect,mass_in_support,energy_spread,level,level_identity_residual\n",
    );
    let opt = |v: Option<f64>| fmt(v.unwrap_or(f64::NAN));
    for r in &records {
        let s = r.support.as_ref();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.k,
            fmt(r.p),
            fmt(r.alpha),
            if r.status == "ok" { "ok" } else { "failed" },
            opt(r.rotation),
            opt(r.avg_action),
            opt(r.invariance_defect),
            opt(s.map(|s| s.mass_in_support)),
            opt(s.and_then(|s| s.energy_spread)),
            opt(s.and_then(|s| s.level)),
            opt(s.and_then(|s| s.level_identity_residual)),
        ));
    }
    Ok(vec![Artifact::text("measures.csv", csv), Artifact::json("measures.json", &records)])
}

#[derive(Serialize)]
struct CensusSummary {
    degenerate: bool,
    orbit_count: usize,
    distinct_actions: Option<usize>,
    distinct_rotations: Vec<(i64, usize)>,
    max_period: usize,
}

fn run_census(job: &Job) -> Result<Vec<Artifact>, CliError> {
    let h = &job.hamiltonian;
    let cfg = FlowConfig::for_spec(h);
    let mut opts = job.config.census.clone().unwrap_or_default();
    if opts.seed.is_none() {
        opts.seed = Some(job.config.seed);
    }
    let report = census(h, &opts, &cfg)?;
    let summary = CensusSummary {
        degenerate: report.degenerate,
        orbit_count: report.orbits.len(),
        distinct_actions: report.distinct_actions,
        distinct_rotations: report.distinct_rotations.clone(),
        max_period: opts.max_period,
    };
    let mut out = vec![Artifact::text("census.csv", report.to_csv()), Artifact::json("census.json", &summary)];
    if h.support_radius().is_some() && !job.config.k_list.is_empty() {
        let lopts = job.config.grids.landscape.apply();
        let caps: Vec<(f64, f64)> = job
            .config
            .k_list
            .par_iter()
            .map(|&k| capacities(h, k, &lopts))
            .collect::<symhom::Result<_>>()?;
        let mut csv = String::from("k,c_plus,c_minus,c_plus_over_k,c_minus_over_k\n");
        for (&k, (cp, cm)) in job.config.k_list.iter().zip(&caps) {
            let kf = k as f64;
            csv.push_str(&format!("{k},{},{},{},{}\n", fmt(*cp), fmt(*cm), fmt(cp / kf), fmt(cm / kf)));
        }
        out.push(Artifact::text("capacities.csv", csv));
    }
    Ok(out)
}

fn run_rset(job: &Job) -> Result<Vec<Artifact>, CliError> {
    let (tabs, mut out) = tables(job)?;
    let last = tabs.last().expect("k_list is nonempty");
    let r = emit_r_set(&last.p_grid, &last.values, job.config.grids.alpha_samples)?;
    out.push(Artifact::text("rset.csv", r.to_csv()));
    Ok(out)
}

/// Executes the task and returns its artifacts with the compute time in seconds.
pub fn execute(job: &Job) -> Result<(Vec<Artifact>, f64), CliError> {
    let start = Instant::now();
    let out = match job.task {
        Task::Homogenize => tables(job)?.1,
        Task::Orbits => run_orbits(job)?,
        Task::Measures => run_measures(job)?,
        Task::Subdiff => run_subdiff(job)?,
        Task::Census => run_census(job)?,
        Task::Rset => run_rset(job)?,
    };
    Ok((out, start.elapsed().as_secs_f64()))
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    task: &'static str,
    seed: u64,
    k_list: &'a [usize],
    hamiltonian_sha256: String,
    config_sha256: String,
    artifacts: Vec<ManifestEntry>,
    runtime_seconds: f64,
    finished_unix_seconds: u64,
}

/// Writes the artifacts and a manifest with their content hashes into `dir`.
pub fn emit(dir: &Path, job: &Job, artifacts: &[Artifact], runtime: f64) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for a in artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
    }
    let config_text = serde_json::to_string(&job.config).expect("config serializes");
    let manifest = Manifest {
        tool: "symhom",
        version: env!("CARGO_PKG_VERSION"),
        core_version: symhom::VERSION,
        task: job.task.name(),
        seed: job.config.seed,
        k_list: &job.config.k_list,
        hamiltonian_sha256: job.hamiltonian.content_hash(),
        config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
        artifacts: artifacts
            .iter()
            .map(|a| ManifestEntry { path: a.name.clone(), bytes: a.bytes.len(), sha256: a.sha256() })
            .collect(),
        runtime_seconds: runtime,
        finished_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let a = Artifact::json("manifest.json", &manifest);
    std::fs::write(dir.join(a.name), a.bytes)?;
    Ok(())
}
