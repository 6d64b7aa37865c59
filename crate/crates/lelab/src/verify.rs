//! Acceptance criteria evaluated on a [`Fleet`], one report line each.

use anyhow::Result;
use lelab_core::nodal::{OrderClass, DEAD_CORE_SLOPE};
use lelab_core::solver::forcing_bound;
use serde::Serialize;

use crate::fleet::{
    angular_report, blowup_report, dead_core_table, dh_controls, dh_solutions, exponent_identity_max, first_turning_point, order_report,
    pohozaev_table, sector_report, witness_report, Fleet,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Line {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub threshold: String,
}

impl Line {
    pub fn render(&self) -> String {
        format!(
            "[{}] {:>2} {:<28} {} (threshold: {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold
        )
    }
}

pub fn name(id: u32) -> &'static str {
    match id {
        1 => "hamiltonian conservation",
        2 => "first turning point",
        3 => "no 1-d singular profile",
        4 => "exponent identity",
        5 => "pohozaev identity",
        6 => "H derivative identity",
        7 => "order spectrum",
        8 => "non-degeneracy",
        9 => "gradient dichotomy",
        10 => "blow-up homogeneity",
        11 => "blow-up alpha bound",
        12 => "sign pattern, energies",
        13 => "good-solution witness",
        14 => "angular round trip",
        15 => "no dead core",
        _ => "unknown",
    }
}

fn line(id: u32, passed: bool, measured: String, threshold: &str) -> Line {
    Line { id, name: name(id), passed, measured, threshold: threshold.into() }
}

fn sci(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn measure(id: u32, fleet: &Fleet) -> Result<Line> {
    Ok(match id {
        1 => {
            let ode = fleet.ode()?;
            let drift = max_of(ode.runs.iter().map(|r| r.drift));
            let gap = max_of(ode.runs.iter().map(|r| r.reference_gap.max(r.reference_drift)));
            line(
                1,
                ode.runs.len() == 20 && drift <= 1e-6 && gap <= 1e-6 && ode.cpu_seconds <= 10.0,
                format!("{} runs, drift {drift:.3e}, vs half step {gap:.3e}, cpu {:.2} s", ode.runs.len(), ode.cpu_seconds),
                "drift <= 1e-6, runtime <= 10 s",
            )
        }
        2 => {
            let w = first_turning_point()?;
            line(2, (w - 0.0625).abs() <= 1e-5, format!("w = {w:.9}"), "0.0625 +- 1e-5")
        }
        3 => {
            let ode = fleet.ode()?;
            let gap = max_of(ode.runs.iter().map(|r| (r.min_hamiltonian - 0.5 * r.slope * r.slope).abs() / (0.5 * r.slope * r.slope)));
            line(3, gap <= 1e-6, format!("max relative gap {gap:.3e}"), "<= 1e-6")
        }
        4 => {
            let d = exponent_identity_max(fleet.spec.seed, 1000)?;
            line(4, d <= 1e-14, format!("max defect {d:.3e} over 1000 q"), "<= 1e-14")
        }
        5 => {
            let rows = pohozaev_table(fleet)?;
            let worst = max_of(rows.iter().map(|r| r.fine));
            let ratio = max_of(["one_signed", "k2"].into_iter().map(|field| {
                let of = rows.iter().filter(|r| r.field == field);
                max_of(of.clone().map(|r| r.fine)) / max_of(of.map(|r| r.coarse))
            }));
            line(
                5,
                worst <= 5e-2 && ratio <= 0.7,
                format!("max residual {worst:.3e}, fine/coarse per field {ratio:.3}"),
                "<= 5e-2 and ratio <= 0.7",
            )
        }
        6 => {
            let c = dh_controls()?;
            let order = c.linear_order();
            let consts = max_of(c.constant.iter().copied());
            let sols = max_of(dh_solutions(fleet)?.into_iter().map(|(_, v)| v));
            line(
                6,
                order >= 1.6 && consts <= 1e-12 && sols <= 5e-2,
                format!("x1 order {order:.3}, constant max {consts:.1e}, solutions max {sols:.3e}"),
                "order >= 1.6, solutions <= 5e-2",
            )
        }
        7 => {
            let rep = order_report(fleet.fine()?)?;
            let o = &rep.origin.fit;
            let off = max_of(rep.regular.iter().map(|p| (p.fit.beta - 1.0).abs()));
            let ok = (o.beta - 4.0 / 3.0).abs() <= 0.1 && o.fit_r2 >= 0.99 && rep.regular.len() == 10 && off <= 0.05;
            line(
                7,
                ok,
                format!("origin beta {:.4} (r2 {:.5}), {} regular points, max |beta - 1| {off:.4}", o.beta, o.fit_r2, rep.regular.len()),
                "4/3 +- 0.1 with r2 >= 0.99; regular 1 +- 0.05",
            )
        }
        8 => {
            let rep = order_report(fleet.fine()?)?;
            let r = rep.origin_nondeg.ratio;
            line(8, r >= 0.1, format!("ratio {r:.4}"), ">= 0.1")
        }
        9 => {
            let mut bad = 0;
            let mut seen = 0;
            let mut outside = 0;
            for sol in [fleet.fine()?, fleet.coarse()?] {
                let rep = order_report(sol)?;
                bad += rep.misclassified();
                seen += rep.classified();
                outside += rep.points().filter(|p| p.fit.class == OrderClass::OutsideSpectrum).count();
            }
            line(9, bad == 0, format!("{bad} misclassified of {seen} classified ({outside} outside the spectrum)"), "0")
        }
        10 => {
            let rep = blowup_report(fleet.fine()?, &fleet.spec.scales)?;
            let mono = rep.deviations.windows(2).all(|w| w[1] <= w[0]);
            let ctrl = max_of(rep.control_deviations.iter().copied());
            line(
                10,
                mono && ctrl <= 3.0 * rep.h,
                format!("deviations [{}], control max {ctrl:.3e} (3h = {:.3e})", sci(&rep.deviations), 3.0 * rep.h),
                "nonincreasing; control <= 3h",
            )
        }
        11 => {
            let rep = blowup_report(fleet.fine()?, &fleet.spec.scales)?;
            line(11, rep.alpha_spread <= 10.0, format!("max/median {:.4}", rep.alpha_spread), "<= 10")
        }
        12 => {
            let rep = sector_report(fleet.fine()?);
            let e = &rep.energies;
            let ok = rep.sign.holds() && e.sign_changing_energy > e.one_signed_energy && e.sign_changing_energy < 0.0;
            line(
                12,
                ok,
                format!(
                    "{} sign violations, E(k=2) {:.6}, E(one-signed) {:.6}",
                    rep.sign.violations, e.sign_changing_energy, e.one_signed_energy
                ),
                "no violations; E(one-signed) < E(k=2) < 0",
            )
        }
        13 => {
            let w = witness_report(fleet)?;
            let ok = w.entries == fleet.spec.eps_steps + 1 && w.max_residual <= 1e-8 && w.tail_ratio < 1.0 && w.max_forcing <= 1.1398 && w.final_penalty <= 1e-3;
            line(
                13,
                ok,
                format!(
                    "{} entries, residual {:.2e}, tail ratio {:.4}, forcing {:.4} (bound {:.4}), penalty {:.2e}",
                    w.entries,
                    w.max_residual,
                    w.tail_ratio,
                    w.max_forcing,
                    forcing_bound(),
                    w.final_penalty
                ),
                "residual <= 1e-8, ratio < 1, forcing <= 1.1398, penalty <= 1e-3",
            )
        }
        14 => {
            let a = angular_report(fleet)?;
            let ok = a.defect <= 1e-8 && a.oracle_gap <= 1e-5 && (a.synthetic.beta - 4.0 / 3.0).abs() <= 0.05;
            line(
                14,
                ok,
                format!("mu {:.6}, defect {:.2e}, oracle gap {:.2e}, synthetic beta {:.4}", a.mu, a.defect, a.oracle_gap, a.synthetic.beta),
                "defect <= 1e-8, gap <= 1e-5, beta 4/3 +- 0.05",
            )
        }
        15 => {
            let table = dead_core_table(fleet)?;
            let worst = table.iter().map(|(_, d)| d.slope).fold(f64::INFINITY, f64::min);
            let ok = table.iter().all(|(_, d)| d.trivial || d.slope >= DEAD_CORE_SLOPE);
            line(15, ok, format!("min slope {worst:.4} over {} fields", table.len()), ">= 0.9")
        }
        _ => line(id, false, "unknown criterion".into(), "-"),
    })
}

/// Never fails: an error while measuring becomes a failed line.
pub fn evaluate(id: u32, fleet: &Fleet) -> Line {
    measure(id, fleet).unwrap_or_else(|e| line(id, false, format!("error: {e:#}"), "-"))
}
