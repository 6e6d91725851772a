//! Post-hoc verification of simulation traces.
//!
//! [`check_trace`] evaluates every closed-loop invariant over a recorded
//! trace and reports pass/fail with worst-case margins. It never aborts: a
//! violated invariant is a failed item in the report.

use std::fmt;

use crate::controller::ControllerConfig;
use crate::planner::{ConstraintPair, PlannerConfig, PlannerVariant};
use crate::trace::SimTrace;

/// Modification signals below this are treated as inactive for the
/// soft-constraint consistency check.
pub const PHI_INACTIVE: f64 = 1e-9;

/// One verified invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: &'static str,
    pub pass: bool,
    /// Worst-case margin; positive means the invariant held with room.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|item| item.pass)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|item| item.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            writeln!(
                f,
                "{} {:<26} margin={:<12.6e} {}",
                if item.pass { "PASS" } else { "FAIL" },
                item.name,
                item.margin,
                item.detail
            )?;
        }
        writeln!(f, "{}", if self.all_pass() { "RESULT: all checks passed" } else { "RESULT: CHECKS FAILED" })
    }
}

/// Static context the checker needs alongside the trace.
pub struct CheckContext<'a> {
    pub constraints: &'a [ConstraintPair],
    pub planner: &'a PlannerConfig,
    pub controller: &'a ControllerConfig,
}

/// Evaluate every invariant over the trace.
pub fn check_trace(trace: &SimTrace, ctx: &CheckContext<'_>) -> CheckReport {
    let mut report = CheckReport::default();
    let n = trace.n_outputs;

    report.items.push(CheckItem {
        name: "fault_free",
        pass: trace.faults.is_empty(),
        margin: if trace.faults.is_empty() { 0.0 } else { -(trace.faults.len() as f64) },
        detail: trace
            .faults
            .first()
            .map(|fault| fault.to_string())
            .unwrap_or_else(|| format!("{} rows", trace.rows.len())),
    });

    if trace.rows.is_empty() {
        report.items.push(CheckItem {
            name: "nonempty",
            pass: false,
            margin: 0.0,
            detail: "trace has no rows".into(),
        });
        return report;
    }

    let mut finite = true;
    let mut funnel_margin = f64::INFINITY;
    let mut funnel_at = 0.0;
    let mut hard_margin = f64::INFINITY;
    let mut hard_at = 0.0;
    let mut bound_respect = f64::INFINITY;
    let mut vel_margin = f64::INFINITY;
    let mut gap_min = f64::INFINITY;
    let mut phi_min = f64::INFINITY;
    let mut soft_margin = f64::INFINITY;
    let mut soft_rows = 0usize;
    let mut u_max: f64 = 0.0;

    for row in &trace.rows {
        for i in 0..n {
            let fields = [
                row.x[i], row.v[i], row.v_d[i], row.e_v[i], row.u[i],
                row.phi_lower[i], row.phi_upper[i], row.rho_lower[i], row.rho_upper[i],
            ];
            if fields.iter().any(|z| !z.is_finite()) {
                finite = false;
            }
            let fm = (row.x[i] - row.rho_lower[i]).min(row.rho_upper[i] - row.x[i]);
            if fm < funnel_margin {
                funnel_margin = fm;
                funnel_at = row.t;
            }
            let hm = (row.x[i] - row.hard_lower[i]).min(row.hard_upper[i] - row.x[i]);
            if hm < hard_margin {
                hard_margin = hm;
                hard_at = row.t;
            }
            bound_respect = bound_respect
                .min(row.rho_lower[i] - row.hard_lower[i])
                .min(row.hard_upper[i] - row.rho_upper[i]);
            let gamma = ctx.controller.gamma_v[i].value(row.t);
            vel_margin = vel_margin.min(gamma - row.e_v[i].abs());
            gap_min = gap_min.min(row.rho_upper[i] - row.rho_lower[i]);
            phi_min = phi_min.min(row.phi_lower[i]).min(row.phi_upper[i]);
            if row.phi_lower[i] < PHI_INACTIVE && row.phi_upper[i] < PHI_INACTIVE {
                soft_rows += 1;
                soft_margin = soft_margin
                    .min(row.x[i] - row.soft_lower[i])
                    .min(row.soft_upper[i] - row.x[i]);
            }
            u_max = u_max.max(row.u[i].abs());
        }
    }

    report.items.push(CheckItem {
        name: "all_finite",
        pass: finite,
        margin: if finite { 0.0 } else { -1.0 },
        detail: String::new(),
    });
    report.items.push(CheckItem {
        name: "funnel_membership",
        pass: funnel_margin > 0.0,
        margin: funnel_margin,
        detail: format!("worst at t={funnel_at}"),
    });
    report.items.push(CheckItem {
        name: "hard_constraint_distance",
        pass: hard_margin > 0.0,
        margin: hard_margin,
        detail: format!("worst at t={hard_at}"),
    });
    // smooth bounds sit strictly inside the hard band; nonsmooth bounds may
    // coincide with it exactly
    report.items.push(CheckItem {
        name: "bounds_respect_hard",
        pass: bound_respect >= -1e-12,
        margin: bound_respect,
        detail: String::new(),
    });
    report.items.push(CheckItem {
        name: "velocity_funnel",
        pass: vel_margin > 0.0,
        margin: vel_margin,
        detail: String::new(),
    });
    report.items.push(CheckItem {
        name: "funnel_gap",
        pass: gap_min > 0.0,
        margin: gap_min,
        detail: "min rho_upper - rho_lower".into(),
    });
    report.items.push(CheckItem {
        name: "phi_nonnegative",
        pass: phi_min >= 0.0,
        margin: phi_min,
        detail: String::new(),
    });
    report.items.push(CheckItem {
        name: "soft_consistency",
        pass: soft_rows == 0 || soft_margin > 0.0,
        margin: if soft_rows == 0 { f64::INFINITY } else { soft_margin },
        detail: format!("{soft_rows} rows with inactive phi"),
    });
    report.items.push(CheckItem {
        name: "control_bounded",
        pass: u_max.is_finite(),
        margin: u_max,
        detail: "max |u|".into(),
    });

    if matches!(ctx.planner.variant, PlannerVariant::Nonsmooth) {
        report.items.push(recovery_fit(trace, ctx));
    }

    report
}

/// Fit of one exponential-recovery episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryFit {
    pub output: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub rate: f64,
}

/// On every maximal interval where the compatibility gap clears the trigger
/// threshold by 0.05 for at least half a second, the active modification
/// signal decays exactly like `exp(-k_c t)`; fit the rate by log-linear
/// regression over the rows where phi is meaningfully positive.
pub fn recovery_fits(trace: &SimTrace, ctx: &CheckContext<'_>) -> Vec<RecoveryFit> {
    let mut fits = Vec::new();
    let threshold = ctx.planner.mu + 0.05;
    for i in 0..trace.n_outputs {
        for side in 0..2 {
            let phi_of = |row: &crate::trace::TraceRow| {
                if side == 0 { row.phi_lower[i] } else { row.phi_upper[i] }
            };
            let eta_of = |t: f64| {
                let (el, eu) = ctx.constraints[i].eta(t);
                if side == 0 { el } else { eu }
            };
            let mut run: Vec<(f64, f64)> = Vec::new();
            let mut run_start = None;
            let mut flush = |run: &mut Vec<(f64, f64)>, start: &mut Option<f64>, t_last: f64| {
                if let Some(t0) = *start {
                    if t_last - t0 >= 0.5 {
                        let points: Vec<(f64, f64)> = run
                            .iter()
                            .filter(|(_, phi)| *phi > 1e-12)
                            .map(|&(t, phi)| (t, phi.ln()))
                            .collect();
                        let span = points.last().map(|p| p.0).unwrap_or(0.0)
                            - points.first().map(|p| p.0).unwrap_or(0.0);
                        if points.len() >= 5 && span > 0.1 {
                            let slope = linear_slope(&points);
                            fits.push(RecoveryFit {
                                output: i,
                                t_start: t0,
                                t_end: t_last,
                                rate: -slope,
                            });
                        }
                    }
                }
                run.clear();
                *start = None;
            };
            let mut t_last = 0.0;
            for row in &trace.rows {
                if eta_of(row.t) > threshold {
                    if run_start.is_none() {
                        run_start = Some(row.t);
                    }
                    run.push((row.t, phi_of(row)));
                    t_last = row.t;
                } else {
                    flush(&mut run, &mut run_start, t_last);
                }
            }
            flush(&mut run, &mut run_start, t_last);
        }
    }
    fits
}

fn recovery_fit(trace: &SimTrace, ctx: &CheckContext<'_>) -> CheckItem {
    let fits = recovery_fits(trace, ctx);
    if fits.is_empty() {
        return CheckItem {
            name: "recovery_rate",
            pass: true,
            margin: f64::INFINITY,
            detail: "no recovery episodes in trace".into(),
        };
    }
    let k_c = ctx.planner.k_c;
    let worst = fits
        .iter()
        .map(|fit| (fit.rate - k_c).abs() / k_c)
        .fold(0.0f64, f64::max);
    CheckItem {
        name: "recovery_rate",
        pass: worst <= 0.10,
        margin: 0.10 - worst,
        detail: format!("{} episodes, worst relative error {worst:.3e}", fits.len()),
    }
}

/// Least-squares slope of `y` against `t`.
fn linear_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in points {
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    (n * sty - st * sy) / (n * stt - st * st)
}
