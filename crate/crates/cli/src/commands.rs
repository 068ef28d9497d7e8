//! The five subcommands. Each returns its output files in memory; nothing is
//! written until the command has succeeded.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use membrane_homog::corrector::{energy_profile, solve_on_mesh, truncated_mesh};
use membrane_homog::effective::{ellipticity_check, run_effective, EffectiveRun};
use membrane_homog::fem::{solve, BilinearFormSpec, DiscreteSystem, Load};
use membrane_homog::geometry::{DeformationMap, InterfaceSpec};
use membrane_homog::homogenize::{
    energy_ratio, hetero_mesh, rate_fit, relative_variation, run_sweep, source_l2, ConvergenceRow, SweepConfig,
};
use membrane_homog::linalg::{symmetric_part, Mat2};
use membrane_homog::mesh::{build_cell_mesh, mesh_report, write_mesh, MembraneMesh};
use membrane_homog::verify::{dense_solve_oracle, induction_suite, surface_integral_crosscheck};
use membrane_homog::Point;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, MeshKind};
use crate::output::{fmt_f64, Artifact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Mesh,
    Corrector,
    Effective,
    Homogenize,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Corrector => "corrector",
            Command::Effective => "effective",
            Command::Homogenize => "homogenize",
            Command::Verify => "verify",
        }
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    match cmd {
        Command::Mesh => cmd_mesh(cfg),
        Command::Corrector => cmd_corrector(cfg),
        Command::Effective => cmd_effective(cfg),
        Command::Homogenize => cmd_homogenize(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

fn direction_label(p: Point) -> String {
    format!("{}:{}", p[0], p[1])
}

/// The resolved plan printed by `--dry-run`.
pub fn plan(cmd: Command, cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Value {
    let seeds = cfg.seeds();
    let tasks: Vec<Value> = match cmd {
        Command::Mesh => vec![json!({ "kind": cfg.mesh.kind, "seed": seeds[0] })],
        Command::Corrector => seeds
            .iter()
            .flat_map(|&s| {
                cfg.corrector
                    .directions
                    .iter()
                    .map(move |&p| json!({ "seed": s, "p": direction_label(p) }))
            })
            .collect(),
        Command::Effective => seeds
            .iter()
            .flat_map(|&s| ["1:0", "0:1"].map(|p| json!({ "seed": s, "p": p })))
            .collect(),
        Command::Homogenize => cfg
            .sweep_seeds()
            .iter()
            .flat_map(|&s| {
                cfg.homogenize
                    .eps_inverse
                    .iter()
                    .map(move |&k| json!({ "seed": s, "eps": 1.0 / k as f64 }))
            })
            .collect(),
        Command::Verify => ["induction", "dense_oracle", "surface"]
            .iter()
            .map(|c| json!({ "check": c }))
            .collect(),
    };
    let mut plan = json!({
        "command": cmd.name(),
        "config_hash": cfg.hash(),
        "output_dir": out,
        "jobs": jobs,
        "seeds": seeds,
        "config": cfg,
        "tasks": tasks,
        "outputs": outputs(cmd),
    });
    if cmd == Command::Homogenize {
        plan["effective_source"] = match &cfg.homogenize.effective {
            Some(p) => json!(p),
            None => json!("inline"),
        };
    }
    plan
}

fn outputs(cmd: Command) -> &'static [&'static str] {
    match cmd {
        Command::Mesh => &["mesh.txt", "mesh_report.json"],
        Command::Corrector => &["corrector_flux.csv", "energy_profile.csv"],
        Command::Effective => &["effective.json"],
        Command::Homogenize => &["convergence.csv", "report.json"],
        Command::Verify => &["verify_report.json"],
    }
}

fn cmd_mesh(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let spec = cfg.interface();
    let cell = build_cell_mesh(&spec, cfg.mesh.h)?;
    let seed = cfg.seeds()[0];
    let mesh: MembraneMesh = match cfg.mesh.kind {
        MeshKind::Cell => cell.mesh.clone(),
        MeshKind::Truncated => {
            let cc = cfg.corrector_config([1.0, 0.0], seed);
            (*truncated_mesh(&cc, &cell, &cfg.map(), [0, 0])?).clone()
        }
        MeshKind::Domain => hetero_mesh(&cell, &cfg.map(), cfg.homogenize.eps_inverse[0], seed)?,
    };
    let mut text = Vec::new();
    write_mesh(&mesh, &mut text)?;
    let r = mesh_report(&mesh)?;
    let report = json!({
        "config_hash": cfg.hash(),
        "kind": cfg.mesh.kind,
        "seed": seed,
        "nodes": r.num_nodes,
        "triangles": r.num_triangles,
        "interface_edges": r.num_interface_edges,
        "min_angle_deg": r.min_angle_deg,
        "max_aspect": r.max_aspect,
        "inverted_triangles": r.inverted_triangles,
        "nonconforming_edges": r.nonconforming_edges,
        "pairing_residual": r.pairing_residual,
        "area": r.area,
        "passes": r.passes(),
    });
    Ok(vec![Artifact::new("mesh.txt", text), Artifact::json("mesh_report.json", &report)])
}

struct SeedCorrectors {
    seed: u64,
    fluxes: Vec<(Point, (Point, Point))>,
    profile: Vec<f64>,
}

fn cmd_corrector(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let spec = cfg.interface();
    let cell = build_cell_mesh(&spec, cfg.mesh.h)?;
    let map = cfg.map();
    let cond = cfg.conductivity();
    let dirs = &cfg.corrector.directions;
    let c = &cfg.corrector;
    let results = cfg
        .seeds()
        .par_iter()
        .map(|&seed| -> membrane_homog::Result<SeedCorrectors> {
            let base = cfg.corrector_config(dirs[0], seed);
            base.validate()?;
            let mesh = truncated_mesh(&base, &cell, &map, [0, 0])?;
            let mut fluxes = Vec::with_capacity(dirs.len());
            let mut profile = Vec::new();
            for (i, &p) in dirs.iter().enumerate() {
                let sol = solve_on_mesh(mesh.clone(), p, c.delta, c.n, cond, None)?;
                fluxes.push((p, sol.flux_average(c.m)));
                if i == 0 {
                    profile = energy_profile(&sol);
                }
            }
            Ok(SeedCorrectors { seed, fluxes, profile })
        })
        .collect::<membrane_homog::Result<Vec<_>>>()?;

    let mut flux_csv = String::from("seed,p,delta,n,m,F11,F12,F21,F22\n");
    let mut energy_csv = String::from("seed,k,E_k\n");
    for r in &results {
        for (p, (plus, minus)) in &r.fluxes {
            writeln!(
                flux_csv,
                "{},{},{},{},{},{},{},{},{}",
                r.seed,
                direction_label(*p),
                fmt_f64(c.delta),
                c.n,
                c.m,
                fmt_f64(plus[0]),
                fmt_f64(plus[1]),
                fmt_f64(minus[0]),
                fmt_f64(minus[1])
            )?;
        }
        for (k, e) in r.profile.iter().enumerate() {
            writeln!(energy_csv, "{},{},{}", r.seed, k + 1, fmt_f64(*e))?;
        }
    }
    Ok(vec![
        Artifact::new("corrector_flux.csv", flux_csv),
        Artifact::new("energy_profile.csv", energy_csv),
    ])
}

fn mat(m: &Mat2) -> Value {
    json!([[m[0][0], m[0][1]], [m[1][0], m[1][1]]])
}

/// Runs the Monte-Carlo tensor for the configured seeds.
pub fn compute_effective(cfg: &ExperimentConfig) -> Result<EffectiveRun> {
    let seeds = cfg.seeds();
    let cc = cfg.corrector_config([1.0, 0.0], seeds[0]);
    let run = run_effective(&cc, &cfg.interface(), &cfg.map(), cfg.conductivity(), &seeds)?;
    Ok(run)
}

fn cmd_effective(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let run = compute_effective(cfg)?;
    let upper = cfg.conductivity().bounds().1;
    let verdict = ellipticity_check(&run.tensor, upper, Some(run.residuals))?;
    let t = &run.tensor;
    let doc = json!({
        "A0": mat(&t.a0),
        "stderr": mat(&t.stderr),
        "rho": t.rho,
        "theta": t.theta,
        "N": t.samples,
        "config_hash": cfg.hash(),
        "rho_stderr": run.volume.rho.stderr,
        "theta_stderr": run.volume.theta.stderr,
        "eigenvalues": verdict.eigenvalues,
        "energy_identity_residuals": run.residuals,
        "seeds": cfg.seeds(),
    });
    Ok(vec![Artifact::json("effective.json", &doc)])
}

/// `(A⁰, θ, source, hash)` read back from an `effective.json`.
pub fn read_effective(path: &Path) -> Result<(Mat2, f64, Option<String>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let entry = |i: usize, j: usize| -> Result<f64> {
        v["A0"][i][j]
            .as_f64()
            .with_context(|| format!("{}: missing A0[{i}][{j}]", path.display()))
    };
    let a0 = [[entry(0, 0)?, entry(0, 1)?], [entry(1, 0)?, entry(1, 1)?]];
    let theta = v["theta"]
        .as_f64()
        .with_context(|| format!("{}: missing theta", path.display()))?;
    if !(theta > 0.0 && theta < 1.0) {
        bail!("{}: theta = {theta} is outside (0, 1)", path.display());
    }
    Ok((a0, theta, v["config_hash"].as_str().map(str::to_string)))
}

fn cmd_homogenize(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let (a0, theta, a0_source, a0_hash) = match &cfg.homogenize.effective {
        Some(path) => {
            let (a0, theta, hash) = read_effective(path)?;
            (a0, theta, json!(path), json!(hash))
        }
        None => {
            let run = compute_effective(cfg)?;
            (run.tensor.a0, run.tensor.theta, json!("inline"), json!(cfg.hash()))
        }
    };
    // Monte-Carlo noise leaves A⁰ asymmetric within its standard error
    let a0_used = symmetric_part(&a0);
    let preset = cfg.homogenize.source;
    let source = move |x: Point| preset.eval(x);
    let seeds = cfg.sweep_seeds();
    let sweep = SweepConfig {
        spec: cfg.interface(),
        map: cfg.map(),
        conductivity: cfg.conductivity(),
        h: cfg.mesh.h,
        eps_inverses: cfg.homogenize.eps_inverse.clone(),
        seeds: seeds.clone(),
        a0: a0_used,
        theta,
        source: &source,
    };
    let rows = run_sweep(&sweep)?;
    let mut csv = String::from(ConvergenceRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    let f_l2 = source_l2(&source);
    let per_seed: Vec<Value> = seeds
        .iter()
        .map(|&s| {
            let rs: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.seed == s).collect();
            let eps: Vec<f64> = rs.iter().map(|r| r.eps).collect();
            let l2: Vec<f64> = rs.iter().map(|r| r.l2_error).collect();
            let fit = match rate_fit(&eps, &l2) {
                Ok(f) => json!({ "exponent": f.exponent, "r_squared": f.r_squared }),
                Err(e) => json!({ "error": e.to_string() }),
            };
            let energy: Vec<f64> = rs.iter().map(|r| energy_ratio(r, f_l2)).collect();
            let jump: Vec<f64> = rs.iter().map(|r| r.jump_over_sqrt_eps).collect();
            json!({
                "seed": s,
                "eps": eps,
                "l2_error": l2,
                "l2_strictly_decreasing": l2.windows(2).all(|w| w[1] < w[0]),
                "l2_rate": fit,
                "energy_ratio": energy,
                "energy_ratio_variation": relative_variation(&energy),
                "jump_over_sqrt_eps_variation": relative_variation(&jump),
            })
        })
        .collect();
    let report = json!({
        "config_hash": cfg.hash(),
        "A0": mat(&a0),
        "A0_used": mat(&a0_used),
        "theta": theta,
        "effective_source": a0_source,
        "effective_config_hash": a0_hash,
        "source": preset,
        "eps_inverse": cfg.homogenize.eps_inverse,
        "seeds": seeds,
        "source_l2": f_l2,
        "per_seed": per_seed,
    });
    Ok(vec![
        Artifact::new("convergence.csv", csv),
        Artifact::json("report.json", &report),
    ])
}

fn cmd_verify(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let seed = cfg.seeds()[0];
    let induction = induction_suite(seed, 1000)?;

    // CG against the dense oracle on a small corrector system
    let cell = build_cell_mesh(&cfg.interface(), 0.1)?;
    let cc = cfg.corrector_config([1.0, 0.0], seed);
    let cc = membrane_homog::corrector::CorrectorConfig { n: 2, m: 1, ..cc };
    let mesh = truncated_mesh(&cc, &cell, &cfg.map(), [0, 0])?;
    let form = BilinearFormSpec {
        conductivity: cfg.conductivity(),
        gamma: 1.0,
        delta: cc.delta,
    };
    let system = DiscreteSystem::dirichlet(&mesh, &form, Load::corrector([1.0, 0.0]))?;
    let cg = solve(&system, None)?;
    let dense = dense_solve_oracle(&system)?;
    let norm = dense.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let oracle_diff = cg
        .values
        .iter()
        .zip(&dense)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
        / norm;

    let spec = InterfaceSpec::default();
    let maps: [(&str, DeformationMap); 3] = [
        ("identity", DeformationMap::Identity),
        ("scaling", DeformationMap::Scaling(2.0)),
        ("bump", DeformationMap::Bump(membrane_homog::geometry::Bump::standard(cfg.geometry.amplitude))),
    ];
    let integrands: [(&str, fn(Point) -> f64); 2] = [("one", |_| 1.0), ("x1", |x| x[0])];
    let mut surface = Vec::new();
    let mut surface_ok = true;
    for (name, map) in &maps {
        for (fname, f) in &integrands {
            let chk = surface_integral_crosscheck(map, &spec, f);
            surface_ok &= chk.diff <= 1e-8;
            surface.push(json!({
                "map": name,
                "f": fname,
                "via_formula": chk.via_formula,
                "via_parametric": chk.via_parametric,
                "diff": chk.diff,
            }));
        }
    }
    let oracle_ok = oracle_diff <= 1e-8;
    let report = json!({
        "config_hash": cfg.hash(),
        "induction": {
            "instances": induction.instances,
            "worst_ratio_to_bound": induction.worst_ratio,
            "max_c_prime": induction.max_c_prime,
            "pass": induction.worst_ratio <= 1.0,
        },
        "dense_oracle": {
            "unknowns": system.dofs.n_dofs - system.constrained.len(),
            "cg_iterations": cg.iterations,
            "relative_difference": oracle_diff,
            "pass": oracle_ok,
        },
        "surface": { "checks": surface, "pass": surface_ok },
        "pass": induction.worst_ratio <= 1.0 && oracle_ok && surface_ok,
    });
    Ok(vec![Artifact::json("verify_report.json", &report)])
}
