//! The command-line pipelines. Each writes its artifacts into an
//! [`Artifacts`] directory; the caller writes the manifest.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Result};
use lelab_core::monotonicity::scan;
use lelab_core::nodal::{blowup, extract_nodal, nondegeneracy, vanishing_order, BlowupOptions, NodalOptions, OrderClass};
use lelab_core::profiles::{angular_shoot, integrate_1d};
use lelab_core::solver::{continuation, one_phase_seed, ApproximationSequence};
use lelab_core::symmetric::{odd_reflect, sign_pattern, solve_sector, verify_reflected_solution, SectorOptions};
use lelab_core::{DiscGrid, FieldSampler, Point, ProblemParams, ScalarField};
use serde_json::{json, Value};

use crate::config::Config;
use crate::fleet::{origin_radii, regular_radii, sample_regular, Fleet, FleetSpec, REGULAR_SAMPLES};
use crate::io::{fmt_f64, read_field, Artifacts, Cell};
use crate::verify::{self, Line};
use crate::Failure;

pub const PIPELINES: [&str; 8] = ["solve", "sector", "scan", "nodal", "blowup", "profile1d", "angular", "verify-all"];

/// Outcome of a pipeline: a summary for the terminal and the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub lines: Vec<String>,
    pub details: Value,
}

pub fn run(pipeline: &str, cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    match pipeline {
        "solve" => solve(cfg, art),
        "sector" => sector(cfg, art),
        "scan" => scan_pipeline(cfg, art),
        "nodal" => nodal(cfg, art),
        "blowup" => blowup_pipeline(cfg, art),
        "profile1d" => profile1d(cfg, art),
        "angular" => angular(cfg, art),
        "verify-all" => verify_all(cfg, art),
        other => bail!(Failure::Config(format!("unknown pipeline {other:?}"))),
    }
}

fn sequence_rows(seq: &ApproximationSequence) -> Vec<Vec<Cell>> {
    let opt = |v: Option<f64>| Cell::Num(v.unwrap_or(f64::NAN));
    seq.entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            vec![
                Cell::from(i),
                e.epsilon.into(),
                e.energy.into(),
                e.residual_inf.into(),
                Cell::from(e.iterations),
                opt(e.sup_increment),
                opt(e.h1_increment),
            ]
        })
        .collect()
}

const SEQUENCE_HEADER: [&str; 7] = ["index", "epsilon", "energy", "residual_inf", "iterations", "sup_increment", "h1_increment"];

fn check_sequence(seq: &ApproximationSequence) -> Result<()> {
    match &seq.failure {
        Some(err) => bail!(Failure::Numerical(format!("continuation stopped after {} entries: {err}", seq.entries.len()))),
        None => Ok(()),
    }
}

fn solve_one_phase(cfg: &Config) -> Result<(ApproximationSequence, ProblemParams)> {
    let p = cfg.params()?;
    let disc = Arc::new(DiscGrid::build_disc(cfg.n)?);
    let seq = continuation(&p, &cfg.schedule(), &one_phase_seed(disc), &cfg.solver())?;
    Ok((seq, p))
}

fn solve(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let (seq, p) = solve_one_phase(cfg)?;
    for (i, e) in seq.entries.iter().enumerate() {
        art.field(&format!("u_eps{i}.f64"), &e.u, Some(&p.with_epsilon(e.epsilon)?))?;
    }
    art.csv("sequence.csv", &SEQUENCE_HEADER, &sequence_rows(&seq))?;
    check_sequence(&seq)?;
    let last = seq.last().expect("complete sequence");
    Ok(Summary {
        lines: vec![format!(
            "{} entries, final eps {:.3e}, energy {:.10}, residual {:.2e}",
            seq.entries.len(),
            last.epsilon,
            last.energy,
            last.residual_inf
        )],
        details: json!({"entries": seq.entries.len(), "energy": last.energy, "residual_inf": last.residual_inf}),
    })
}

fn sector_options(cfg: &Config) -> SectorOptions {
    SectorOptions { n: cfg.n, schedule: cfg.schedule(), solver: cfg.solver(), seed: cfg.seed, ..SectorOptions::default() }
}

fn sector(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let p = cfg.params()?;
    let sol = solve_sector(cfg.k, &p, &sector_options(cfg))?;
    let disc = Arc::new(DiscGrid::build_disc(cfg.n)?);
    let mut last = None;
    for (i, e) in sol.sequence.entries.iter().enumerate() {
        let u = odd_reflect(&e.u, cfg.k, disc.clone())?;
        art.field(&format!("uk{}_eps{i}.f64", cfg.k), &u, Some(&p.with_epsilon(e.epsilon)?))?;
        last = Some((u, e.epsilon));
    }
    art.csv(&format!("sector_k{}.csv", cfg.k), &SEQUENCE_HEADER, &sequence_rows(&sol.sequence))?;
    let (u, eps) = last.expect("nonempty sequence");
    let pe = p.with_epsilon(eps)?;
    let refl = verify_reflected_solution(&u, cfg.k, &pe, cfg.tol)?;
    let sign = sign_pattern(&u, cfg.k);
    let energy = lelab_core::solver::energy(&u, &p);
    let details = json!({
        "k": cfg.k,
        "seeds_tried": sol.seeds_tried,
        "energy": energy,
        "sign_violations": sign.violations,
        "sign_nodes_checked": sign.checked,
        "off_ray_residual": refl.off_ray_residual,
        "ray_band_residual": refl.ray_band_residual,
        "ray_flagged": refl.ray_flagged,
    });
    art.json(&format!("sector_k{}.json", cfg.k), &details)?;
    Ok(Summary {
        lines: vec![format!(
            "k = {}: energy {energy:.10}, {} sign violations, off-ray residual {:.2e}",
            cfg.k, sign.violations, refl.off_ray_residual
        )],
        details,
    })
}

/// The field named by `cfg.field` with the limit parameters to analyse it with.
fn analysed_field(cfg: &Config) -> Result<(ScalarField, ProblemParams, String)> {
    match cfg.field.as_str() {
        "one_phase" => {
            let (seq, p) = solve_one_phase(cfg)?;
            check_sequence(&seq)?;
            Ok((seq.last().expect("complete sequence").u.clone(), p, "one_phase".into()))
        }
        "sector" => {
            let p = cfg.params()?;
            let sol = solve_sector(cfg.k, &p, &sector_options(cfg))?;
            let u = odd_reflect(sol.final_field(), cfg.k, Arc::new(DiscGrid::build_disc(cfg.n)?))?;
            Ok((u, p, format!("sector k = {}", cfg.k)))
        }
        path => {
            let (u, side) = read_field(Path::new(path))?;
            let p = match side.params {
                Some(r) => ProblemParams::new(r.q, r.lambda_plus, r.lambda_minus)?.with_mu(r.mu)?,
                None => cfg.params()?,
            };
            Ok((u, p, path.to_string()))
        }
    }
}

fn scan_pipeline(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let (u, p, label) = analysed_field(cfg)?;
    let s = FieldSampler::new(&u);
    let sc = cfg.scan_config();
    let mut header = vec!["r".to_string(), "H".to_string()];
    header.extend(sc.t_list.iter().map(|t| format!("D_t{t}")));
    header.extend(sc.t_list.iter().map(|t| format!("N_t{t}")));
    header.extend(sc.gt_pairs.iter().map(|(g, t)| format!("W_g{g}_t{t}")));
    header.extend(["poh_res", "dH_res", "dD_res"].map(String::from));
    let mut lines = Vec::new();
    for (c, center) in cfg.center_points().into_iter().enumerate() {
        let fs = scan(&s, &p, center, &cfg.radii, &sc)?;
        let rows: Vec<Vec<Cell>> = fs
            .records
            .iter()
            .map(|rec| {
                let mut row = vec![Cell::Num(rec.r), Cell::Num(rec.h)];
                row.extend(rec.d.iter().map(|v| Cell::Num(*v)));
                row.extend(rec.n.iter().map(|v| Cell::Num(v.unwrap_or(f64::NAN))));
                row.extend(rec.w.iter().map(|v| Cell::Num(*v)));
                row.extend([rec.pohozaev_residual, rec.dh_residual, rec.dd_residual].map(Cell::Num));
                row
            })
            .collect();
        art.csv_owned(&format!("scan_c{c}.csv"), &header, &rows)?;
        let worst = fs.records.iter().map(|r| r.pohozaev_residual).fold(0.0, f64::max);
        lines.push(format!("center ({}, {}): {} radii, max pohozaev residual {worst:.3e}", center.x, center.y, fs.records.len()));
    }
    Ok(Summary { lines, details: json!({"field": label}) })
}

fn class_name(c: OrderClass) -> &'static str {
    match c {
        OrderClass::One => "one",
        OrderClass::GammaQ => "gamma_q",
        OrderClass::OutsideSpectrum => "outside",
        OrderClass::Unresolved => "unresolved",
        OrderClass::Degenerate => "degenerate",
    }
}

fn nodal(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let (u, p, label) = analysed_field(cfg)?;
    let s = FieldSampler::new(&u);
    let h = u.grid().h();
    let g = p.gamma_q();
    let set = extract_nodal(&s, p.alpha_max(), &NodalOptions::default());
    art.json("nodal.json", &crate::io::nodal_geojson(&set))?;
    let mut points: Vec<(Point, Vec<f64>)> = Vec::new();
    let o_radii = origin_radii(h)?;
    for c in &set.clusters {
        if u.grid().covers(c.center, o_radii[o_radii.len() - 1]) {
            points.push((c.center, o_radii.clone()));
        }
    }
    let r_radii = regular_radii(h)?;
    points.extend(sample_regular(&set, h, REGULAR_SAMPLES).into_iter().map(|pt| (pt, r_radii.clone())));
    let mut rows = Vec::new();
    for (pt, radii) in &points {
        let fit = vanishing_order(&s, *pt, radii, g)?;
        let nd = if fit.beta.is_finite() { nondegeneracy(&s, *pt, fit.beta, radii)?.ratio } else { 0.0 };
        let (gx, gy) = s.grad(*pt);
        rows.push(vec![
            Cell::Num(pt.x),
            Cell::Num(pt.y),
            Cell::Num(fit.beta),
            Cell::Num(fit.fit_r2),
            class_name(fit.class).into(),
            Cell::Num(gx.hypot(gy)),
            Cell::Num(nd),
        ]);
    }
    art.csv("orders.csv", &["x", "y", "beta", "fit_r2", "class", "grad_norm", "nondeg_ratio"], &rows)?;
    Ok(Summary {
        lines: vec![format!(
            "{} polylines, {} regular and {} singular contour points, {} clusters, tau_grad {}",
            set.segments.len(),
            set.regular_points.len(),
            set.singular_points.len(),
            set.clusters.len(),
            fmt_f64(set.tau_grad)
        )],
        details: json!({"field": label, "clusters": set.clusters.len(), "order_rows": rows.len()}),
    })
}

fn blowup_pipeline(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let (u, p, label) = analysed_field(cfg)?;
    let s = FieldSampler::new(&u);
    let opts = BlowupOptions::new(p.gamma_q());
    let mut lines = Vec::new();
    for (c, center) in cfg.center_points().into_iter().enumerate() {
        let seq = blowup(&s, center, &cfg.scales, &opts)?;
        let mut rows = Vec::new();
        for (j, f) in seq.frames.iter().enumerate() {
            art.field(&format!("blowup_c{c}_s{j}.f64"), f.field.field(), None)?;
            rows.push(vec![Cell::Num(f.scale), Cell::Num(f.norm), Cell::Num(f.alpha), Cell::Num(f.normalization), Cell::Num(f.deviation)]);
        }
        art.csv(&format!("blowup_c{c}.csv"), &["scale", "norm", "alpha", "normalization", "deviation"], &rows)?;
        lines.push(format!("center ({}, {}): alpha max/median {:.4}", center.x, center.y, seq.alpha_spread()));
    }
    Ok(Summary { lines, details: json!({"field": label}) })
}

fn profile1d(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let p = cfg.params()?;
    let tr = integrate_1d(cfg.w0, cfg.w0p, &p, cfg.t_end, cfg.dt)?;
    let rows: Vec<Vec<Cell>> = (0..tr.t.len())
        .map(|i| vec![Cell::Num(tr.t[i]), Cell::Num(tr.w[i]), Cell::Num(tr.wp[i]), Cell::Num(tr.hamiltonian[i])])
        .collect();
    art.csv("trajectory.csv", &["t", "w", "wp", "H"], &rows)?;
    let details = json!({
        "q": tr.q,
        "w0": cfg.w0,
        "w0p": cfg.w0p,
        "T": cfg.t_end,
        "dt": cfg.dt,
        "trivial": tr.trivial,
        "max_relative_drift": tr.max_relative_drift(),
        "min_hamiltonian": tr.min_hamiltonian(),
        "turning_points": tr.turning_points.len(),
        "first_turning_point": tr.turning_points.first(),
        "zeros": tr.zeros.len(),
        "halvings": tr.halvings,
    });
    art.json("profile1d.json", &details)?;
    Ok(Summary {
        lines: vec![format!(
            "{} samples, relative drift {:.3e}, {} zero crossings",
            tr.t.len(),
            tr.max_relative_drift(),
            tr.zeros.len()
        )],
        details,
    })
}

fn angular(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let p = cfg.params()?;
    let prof = angular_shoot(cfg.k, &p, cfg.tol)?;
    let rows: Vec<Vec<Cell>> =
        (0..prof.theta.len()).map(|i| vec![Cell::Num(prof.theta[i]), Cell::Num(prof.phi[i]), Cell::Num(prof.phip[i])]).collect();
    art.csv(&format!("angular_k{}.csv", cfg.k), &["theta", "phi", "phip"], &rows)?;
    let details = json!({
        "k": prof.k,
        "q": prof.q,
        "mu": prof.mu,
        "residual": prof.residual,
        "periodicity": prof.periodicity,
        "sign_changes": prof.sign_changes,
        "brackets": prof.brackets,
    });
    art.json(&format!("angular_k{}.json", cfg.k), &details)?;
    Ok(Summary {
        lines: vec![format!("k = {}: mu {:.10}, defect {:.2e}", prof.k, prof.mu, prof.residual)],
        details,
    })
}

fn verify_all(cfg: &Config, art: &mut Artifacts) -> Result<Summary> {
    let fleet = Fleet::new(FleetSpec::from_config(cfg));
    let mut lines = Vec::new();
    let mut results: Vec<Line> = Vec::new();
    if cfg.criteria.is_empty() {
        eprintln!("warning: no criteria selected, nothing to verify");
    }
    for &id in &cfg.criteria {
        let l = verify::evaluate(id, &fleet);
        println!("{}", l.render());
        results.push(l);
    }
    art.json("verify.json", &serde_json::to_value(&results)?)?;
    let failed: Vec<u32> = results.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    lines.push(format!("{} of {} criteria passed", results.len() - failed.len(), results.len()));
    let details = json!({"passed": results.len() - failed.len(), "failed": failed});
    if !failed.is_empty() {
        for l in &lines {
            println!("{l}");
        }
        bail!(Failure::Verification(failed));
    }
    Ok(Summary { lines, details })
}
