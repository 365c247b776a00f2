//! Sweep studies: micro-vs-macro eps-convergence, delta-convergence of the
//! regularization at the micro and macro levels, error norms across meshes,
//! and rate fitting.
//!
//! Four parameter-dependent problems appear as run labels: the regularized
//! micro problem, its non-regularized variant (`delta = 0`), the regularized
//! limit model, and the non-regularized limit model. The eps studies compare
//! micro bulk fields against the limit model's bulk fields in
//! `L2((0,T) x region)`; the layer is compared through averages, since the
//! two-scale layer limit is not a single-mesh quantity.

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::fem::{DofMap, TransientField};
use crate::geometry::RegionTag;
use crate::micro::{energy_report, solve_micro, EnergyReport, MicroSolution};
use crate::problem::ScalingChoice;
use crate::upscaled::{
    s1::CellProblem, solve_macro_s1, solve_macro_s2, solve_macro_s3s4,
};
use std::time::Instant;

/// A nodal transient field together with its mesh.
#[derive(Clone, Copy)]
pub struct FieldRef<'a> {
    pub mesh: &'a crate::mesh::TaggedMesh,
    pub field: &'a TransientField,
}

/// `L2((window) x region)` distance between two fields on possibly
/// different meshes. `b` provides the quadrature (triangles of the region
/// on `b.mesh`); `a` is evaluated there by point location and linear
/// interpolation in space and time, extended by zero where `a` has no mesh
/// (indicator extension over holes and trimmed regions).
pub fn l2_error(a: FieldRef, b: FieldRef, region: RegionTag, window: (f64, f64)) -> Result<f64> {
    if !b.mesh.tri_region.contains(&region) {
        return Err(Error::RegionMismatch(format!(
            "quadrature mesh carries no {region:?} triangles"
        )));
    }
    let times: Vec<f64> = b
        .field
        .times
        .iter()
        .cloned()
        .filter(|&t| t >= window.0 - 1e-12 && t <= window.1 + 1e-12)
        .collect();
    if times.is_empty() {
        return Err(Error::RegionMismatch(format!(
            "time window ({}, {}) contains no sample times",
            window.0, window.1
        )));
    }
    let quad: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let mut space_sq = Vec::with_capacity(times.len());
    for &t in &times {
        let av = a.field.at_time(t);
        let bv = b.field.at_time(t);
        let mut acc = 0.0;
        for ti in 0..b.mesh.triangle_count() {
            if b.mesh.tri_region[ti] != region {
                continue;
            }
            let geo = b.mesh.tri_geo(ti);
            let tri = b.mesh.triangles[ti];
            for bary in &quad {
                let mut x = [0.0, 0.0];
                let mut vb = 0.0;
                for k in 0..3 {
                    x[0] += bary[k] * b.mesh.vertices[tri[k]][0];
                    x[1] += bary[k] * b.mesh.vertices[tri[k]][1];
                    vb += bary[k] * bv[tri[k]];
                }
                let va = a.mesh.eval(&av, x).unwrap_or(0.0);
                acc += geo.area / 3.0 * (va - vb) * (va - vb);
            }
        }
        space_sq.push(acc);
    }
    // trapezoidal rule in time
    let mut total = 0.0;
    if times.len() == 1 {
        total = space_sq[0];
    } else {
        for k in 0..times.len() - 1 {
            total += 0.5 * (space_sq[k] + space_sq[k + 1]) * (times[k + 1] - times[k]);
        }
    }
    Ok(total.sqrt())
}

/// Same-mesh variant: both transient fields live on `mesh`.
pub fn l2_error_same_mesh(
    mesh: &crate::mesh::TaggedMesh,
    a: &TransientField,
    b: &TransientField,
    region: RegionTag,
    window: (f64, f64),
) -> Result<f64> {
    let dofs = DofMap::identity(mesh.vertex_count());
    let times: Vec<f64> = b
        .times
        .iter()
        .cloned()
        .filter(|&t| t >= window.0 - 1e-12 && t <= window.1 + 1e-12)
        .collect();
    if times.is_empty() {
        return Err(Error::RegionMismatch("empty time window".into()));
    }
    let mut space_sq = Vec::with_capacity(times.len());
    for &t in &times {
        let av = a.at_time(t);
        let bv = b.at_time(t);
        let diff: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x - y).collect();
        space_sq.push(crate::fem::l2_norm_sq(mesh, &dofs, &diff, Some(region)));
    }
    let mut total = 0.0;
    if times.len() == 1 {
        total = space_sq[0];
    } else {
        for k in 0..times.len() - 1 {
            total += 0.5 * (space_sq[k] + space_sq[k + 1]) * (times[k + 1] - times[k]);
        }
    }
    Ok(total.sqrt())
}

/// Least-squares slope of `log(value)` against `log(parameter)`.
pub fn fit_rate(values: &[f64], parameters: &[f64]) -> Result<f64> {
    if values.len() < 3 || parameters.len() != values.len() {
        return Err(Error::SweepTooShort {
            got: values.len(),
            need: 3,
        });
    }
    for &v in values.iter().chain(parameters) {
        if !(v > 0.0) {
            return Err(Error::NonPositiveInput(v));
        }
    }
    let xs: Vec<f64> = parameters.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// One sweep member of a convergence report.
#[derive(Debug, Clone, Copy)]
pub struct SweepMember {
    pub value: f64,
    pub err_l: f64,
    pub err_r: f64,
    pub err_layer_avg: f64,
    pub energy: EnergyReport,
    pub wall_ms: u128,
}

/// Errors, energy series and fitted rates across a sweep.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub parameter: &'static str,
    pub members: Vec<SweepMember>,
    pub rate_l: Option<f64>,
    pub rate_r: Option<f64>,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    /// Deterministic results CSV
    /// (`sweep_value,err_L,err_R,err_layer_avg,e1,e2,e3`). Timings live in
    /// the separate timing CSV so that reruns reproduce this file
    /// byte-for-byte.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("sweep_value,err_L,err_R,err_layer_avg,e1,e2,e3\n");
        for m in &self.members {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                m.value, m.err_l, m.err_r, m.err_layer_avg, m.energy.e1, m.energy.e2, m.energy.e3
            ));
        }
        out
    }

    /// Wall-clock per member (`sweep_value,wall_ms`), non-deterministic by
    /// nature.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("sweep_value,wall_ms\n");
        for m in &self.members {
            out.push_str(&format!("{:.12e},{}\n", m.value, m.wall_ms));
        }
        out
    }

    /// Max/min ratios of the (e1, e2, e3) series across the sweep; the
    /// operational surrogate for the eps-uniform energy bounds.
    pub fn energy_bands(&self) -> [f64; 3] {
        let band = |pick: &dyn Fn(&SweepMember) -> f64| {
            let vals: Vec<f64> = self.members.iter().map(pick).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi / lo
        };
        [
            band(&|m| m.energy.e1),
            band(&|m| m.energy.e2),
            band(&|m| m.energy.e3),
        ]
    }

    pub fn errors_l(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.err_l).collect()
    }

    pub fn errors_r(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.err_r).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.value).collect()
    }
}

/// Macro solution reduced to comparable fields: bulk meshes with transient
/// fields, and the layer reduced to an average time series.
pub struct MacroFields {
    pub left_mesh: crate::mesh::TaggedMesh,
    pub left: TransientField,
    pub right_mesh: crate::mesh::TaggedMesh,
    pub right: TransientField,
    /// `(t, layer average)` series of the transformed layer variable.
    pub layer_avg: Vec<(f64, f64)>,
}

/// Runs the limit model of the given choice and extracts comparable fields.
pub fn run_macro_fields(config: &ProblemConfig, choice: ScalingChoice) -> Result<MacroFields> {
    match choice {
        ScalingChoice::S1 => {
            let sol = solve_macro_s1(config)?;
            let cell = CellProblem::new(
                &config.geometry.cell,
                config.mesh.cell_edge,
                &config.coefficients.d_m,
                config.time.dt,
                config.solver.tol_lin,
            )?;
            let mut layer_avg = Vec::new();
            for (k, &t) in sol.cell_fields[0].times.iter().enumerate() {
                let avgs = sol.layer_averages(&cell, k);
                layer_avg.push((t, avgs.iter().sum::<f64>() / avgs.len() as f64));
            }
            Ok(MacroFields {
                left_mesh: sol.bulk_l_mesh,
                left: sol.bulk_l,
                right_mesh: sol.bulk_r_mesh,
                right: sol.bulk_r,
                layer_avg,
            })
        }
        ScalingChoice::S2 => {
            let sol = solve_macro_s2(config)?;
            let layer_avg = (0..sol.field.len())
                .map(|k| (sol.field.times[k], sol.interface_average(k)))
                .collect();
            Ok(MacroFields {
                left_mesh: sol.mesh.clone(),
                left: sol.field.clone(),
                right_mesh: sol.mesh,
                right: sol.field,
                layer_avg,
            })
        }
        ScalingChoice::S3 | ScalingChoice::S4 => {
            let sol = solve_macro_s3s4(config)?;
            let lines: Vec<crate::upscaled::s3s4::CellLine> = Vec::new();
            let _ = lines;
            let mut layer_avg = Vec::new();
            for (k, &t) in sol.bulk_l.times.iter().enumerate() {
                let mut acc = 0.0;
                for field in &sol.layer_fields {
                    let level = &field.values[k];
                    acc += level.iter().sum::<f64>() / level.len() as f64;
                }
                layer_avg.push((t, acc / sol.layer_fields.len() as f64));
            }
            Ok(MacroFields {
                left_mesh: sol.bulk_l_mesh,
                left: sol.bulk_l,
                right_mesh: sol.bulk_r_mesh,
                right: sol.bulk_r,
                layer_avg,
            })
        }
        ScalingChoice::Unclassified => Err(Error::Config(
            "cannot run a limit model for an unclassified scaling".into(),
        )),
    }
}

fn micro_layer_average(sol: &MicroSolution) -> Vec<(f64, f64)> {
    let dofs = DofMap::identity(sol.mesh.vertex_count());
    let area = sol.mesh.region_area(RegionTag::Middle);
    sol.field
        .times
        .iter()
        .zip(&sol.field.values)
        .map(|(&t, v)| {
            let integral =
                crate::fem::region_integral(&sol.mesh, &dofs, v, Some(RegionTag::Middle));
            (t, integral / area)
        })
        .collect()
}

fn series_l2(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    // trapezoid of the squared difference over the common time range,
    // sampling b's series linearly at a's times
    let interp = |series: &[(f64, f64)], t: f64| -> f64 {
        if t <= series[0].0 {
            return series[0].1;
        }
        if t >= series[series.len() - 1].0 {
            return series[series.len() - 1].1;
        }
        let mut k = 0;
        while series[k + 1].0 < t {
            k += 1;
        }
        let w = (t - series[k].0) / (series[k + 1].0 - series[k].0);
        series[k].1 * (1.0 - w) + series[k + 1].1 * w
    };
    let mut total = 0.0;
    for w in a.windows(2) {
        let d0 = w[0].1 - interp(b, w[0].0);
        let d1 = w[1].1 - interp(b, w[1].0);
        total += 0.5 * (d0 * d0 + d1 * d1) * (w[1].0 - w[0].0);
    }
    total.sqrt()
}

/// eps-sweep: solves the micro problem per eps, solves the limit model
/// once, and reports bulk L2 errors, the layer-average error, the scaled
/// energy series and fitted rates.
pub fn study_eps(
    config: &ProblemConfig,
    eps_list: &[f64],
    choice: ScalingChoice,
) -> Result<ConvergenceReport> {
    if eps_list.len() < 3 {
        return Err(Error::SweepTooShort {
            got: eps_list.len(),
            need: 3,
        });
    }
    let classified = config.classify()?;
    if classified != choice {
        return Err(Error::Config(format!(
            "config classifies as {} but the study was asked for {}",
            classified.name(),
            choice.name()
        )));
    }
    let window = (0.0, config.time.t_end);
    let macro_fields = run_macro_fields(config, choice)?;
    let mut members = Vec::new();
    for &eps in eps_list {
        let started = Instant::now();
        let cfg_eps = config.with_eps(eps)?;
        let micro = solve_micro(&cfg_eps)?;
        let err_l = l2_error(
            FieldRef {
                mesh: &micro.mesh,
                field: &micro.field,
            },
            FieldRef {
                mesh: &macro_fields.left_mesh,
                field: &macro_fields.left,
            },
            RegionTag::Left,
            window,
        )?;
        let err_r = l2_error(
            FieldRef {
                mesh: &micro.mesh,
                field: &micro.field,
            },
            FieldRef {
                mesh: &macro_fields.right_mesh,
                field: &macro_fields.right,
            },
            RegionTag::Right,
            window,
        )?;
        let err_layer_avg = series_l2(&micro_layer_average(&micro), &macro_fields.layer_avg);
        let energy = energy_report(&micro, &config.scalings, &cfg_eps.drift);
        members.push(SweepMember {
            value: eps,
            err_l,
            err_r,
            err_layer_avg,
            energy,
            wall_ms: started.elapsed().as_millis(),
        });
    }
    let rate_l = fit_rate(
        &members.iter().map(|m| m.err_l).collect::<Vec<_>>(),
        eps_list,
    )
    .ok();
    let rate_r = fit_rate(
        &members.iter().map(|m| m.err_r).collect::<Vec<_>>(),
        eps_list,
    )
    .ok();
    Ok(ConvergenceReport {
        parameter: "eps",
        members,
        rate_l,
        rate_r,
        warnings: Vec::new(),
    })
}

/// Level of a delta study: the eps-dependent problem at the config's eps,
/// or the limit model of the config's classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyLevel {
    Micro,
    Macro,
}

/// delta-sweep: solves the problem for each delta (descending list ending
/// in 0) and reports distances to the non-regularized solution.
pub fn study_delta(
    config: &ProblemConfig,
    delta_list: &[f64],
    level: StudyLevel,
) -> Result<ConvergenceReport> {
    let mut warnings = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    for &d in delta_list {
        if d < 0.0 {
            return Err(Error::Config(format!("negative delta {d}")));
        }
        if deltas.iter().any(|&p| (p - d).abs() < 1e-15) {
            warnings.push(format!("duplicate delta {d} dropped"));
            continue;
        }
        if let Some(&last) = deltas.last() {
            if d >= last {
                return Err(Error::Config(
                    "delta list must be sorted in descending order".into(),
                ));
            }
        }
        deltas.push(d);
    }
    if deltas.last() != Some(&0.0) {
        return Err(Error::Config("delta list must terminate in 0".into()));
    }
    if deltas.len() < 2 {
        return Err(Error::SweepTooShort {
            got: deltas.len(),
            need: 2,
        });
    }
    let positive: Vec<f64> = deltas[..deltas.len() - 1].to_vec();
    let window = (0.0, config.time.t_end);

    match level {
        StudyLevel::Micro => {
            let reference = solve_micro(&config.with_delta(0.0))?;
            let mut members = Vec::new();
            for &delta in &positive {
                let started = Instant::now();
                let cfg = config.with_delta(delta);
                let sol = solve_micro(&cfg)?;
                let err_l = l2_error_same_mesh(
                    &sol.mesh,
                    &sol.field,
                    &reference.field,
                    RegionTag::Left,
                    window,
                )?;
                let err_r = l2_error_same_mesh(
                    &sol.mesh,
                    &sol.field,
                    &reference.field,
                    RegionTag::Right,
                    window,
                )?;
                let err_m = l2_error_same_mesh(
                    &sol.mesh,
                    &sol.field,
                    &reference.field,
                    RegionTag::Middle,
                    window,
                )?;
                let energy = energy_report(&sol, &config.scalings, &cfg.drift);
                members.push(SweepMember {
                    value: delta,
                    err_l,
                    err_r,
                    err_layer_avg: err_m,
                    energy,
                    wall_ms: started.elapsed().as_millis(),
                });
            }
            let rate_l = fit_rate(&members.iter().map(|m| m.err_l).collect::<Vec<_>>(), &positive).ok();
            let rate_r = fit_rate(&members.iter().map(|m| m.err_r).collect::<Vec<_>>(), &positive).ok();
            Ok(ConvergenceReport {
                parameter: "delta",
                members,
                rate_l,
                rate_r,
                warnings,
            })
        }
        StudyLevel::Macro => {
            let choice = config.classify()?;
            let reference = run_macro_fields(&config.with_delta(0.0), choice)?;
            let mut members = Vec::new();
            for &delta in &positive {
                let started = Instant::now();
                let cfg = config.with_delta(delta);
                let fields = run_macro_fields(&cfg, choice)?;
                let err_l = l2_error_same_mesh(
                    &fields.left_mesh,
                    &fields.left,
                    &reference.left,
                    RegionTag::Left,
                    window,
                )?;
                let err_r = l2_error_same_mesh(
                    &fields.right_mesh,
                    &fields.right,
                    &reference.right,
                    RegionTag::Right,
                    window,
                )?;
                let err_layer_avg = series_l2(&fields.layer_avg, &reference.layer_avg);
                // bulk-only analogue of the energy series for limit models
                let dofs_l = DofMap::identity(fields.left_mesh.vertex_count());
                let dofs_r = DofMap::identity(fields.right_mesh.vertex_count());
                let e1 = crate::fem::l2_norm_sq(
                    &fields.left_mesh,
                    &dofs_l,
                    fields.left.last(),
                    Some(RegionTag::Left),
                ) + crate::fem::l2_norm_sq(
                    &fields.right_mesh,
                    &dofs_r,
                    fields.right.last(),
                    Some(RegionTag::Right),
                );
                members.push(SweepMember {
                    value: delta,
                    err_l,
                    err_r,
                    err_layer_avg,
                    energy: EnergyReport {
                        e1,
                        e2: 0.0,
                        e3: 0.0,
                        e4: 0.0,
                    },
                    wall_ms: started.elapsed().as_millis(),
                });
            }
            let rate_l =
                fit_rate(&members.iter().map(|m| m.err_l).collect::<Vec<_>>(), &positive).ok();
            let rate_r =
                fit_rate(&members.iter().map(|m| m.err_r).collect::<Vec<_>>(), &positive).ok();
            Ok(ConvergenceReport {
                parameter: "delta",
                members,
                rate_l,
                rate_r,
                warnings,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_rectangle_domain, BoundaryTag};
    use crate::mesh::triangulate;

    #[test]
    fn fit_rate_examples() {
        let r = fit_rate(&[0.1, 0.05, 0.025], &[0.25, 0.125, 0.0625]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = fit_rate(&[0.1, 0.025, 0.00625], &[0.25, 0.125, 0.0625]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let r = fit_rate(&[0.3, 0.3, 0.3], &[0.25, 0.125, 0.0625]).unwrap();
        assert!(r.abs() < 1e-12);
        assert!(matches!(
            fit_rate(&[0.1, 0.0, 0.1], &[1.0, 0.5, 0.25]),
            Err(Error::NonPositiveInput(_))
        ));
        assert!(matches!(
            fit_rate(&[0.1, 0.05], &[1.0, 0.5]),
            Err(Error::SweepTooShort { .. })
        ));
    }

    fn square_field(edge: f64, f: impl Fn(f64, [f64; 2]) -> f64) -> (crate::mesh::TaggedMesh, TransientField) {
        let dom = build_rectangle_domain(
            0.0,
            1.0,
            1.0,
            BoundaryTag::GammaL,
            BoundaryTag::GammaR,
            RegionTag::Left,
        );
        let mesh = triangulate(&dom, edge).unwrap();
        let mut field = TransientField::new();
        for &t in &[0.0, 0.5, 1.0] {
            let v: Vec<f64> = mesh.vertices.iter().map(|&x| f(t, x)).collect();
            field.push(t, v);
        }
        (mesh, field)
    }

    #[test]
    fn identical_fields_have_zero_error() {
        let (mesh, field) = square_field(0.25, |t, x| t + x[0] - x[1]);
        let a = FieldRef {
            mesh: &mesh,
            field: &field,
        };
        let err = l2_error(a, a, RegionTag::Left, (0.0, 1.0)).unwrap();
        assert!(err < 1e-14);
    }

    #[test]
    fn unit_gap_on_unit_region_and_window() {
        let (mesh_a, field_a) = square_field(0.25, |_, _| 1.0);
        let (mesh_b, field_b) = square_field(0.25, |_, _| 0.0);
        let err = l2_error(
            FieldRef {
                mesh: &mesh_a,
                field: &field_a,
            },
            FieldRef {
                mesh: &mesh_b,
                field: &field_b,
            },
            RegionTag::Left,
            (0.0, 1.0),
        )
        .unwrap();
        assert!((err - 1.0).abs() < 1e-12, "err = {err}");
    }

    #[test]
    fn cross_mesh_constants_match_same_mesh() {
        let (mesh_a, field_a) = square_field(0.17, |_, _| 0.8);
        let (mesh_b, field_b) = square_field(0.25, |_, _| 0.3);
        let cross = l2_error(
            FieldRef {
                mesh: &mesh_a,
                field: &field_a,
            },
            FieldRef {
                mesh: &mesh_b,
                field: &field_b,
            },
            RegionTag::Left,
            (0.0, 1.0),
        )
        .unwrap();
        let same = 0.5; // |0.8 - 0.3| over unit area and window
        assert!((cross - same).abs() < 1e-10, "cross = {cross}");
    }

    #[test]
    fn region_mismatch_is_reported() {
        let (mesh, field) = square_field(0.25, |_, _| 0.0);
        let a = FieldRef {
            mesh: &mesh,
            field: &field,
        };
        assert!(matches!(
            l2_error(a, a, RegionTag::Middle, (0.0, 1.0)),
            Err(Error::RegionMismatch(_))
        ));
    }

    #[test]
    fn delta_list_validation() {
        let cfg = ProblemConfig::from_toml_str(crate::config::EXAMPLE_S1_TOML).unwrap();
        assert!(study_delta(&cfg, &[0.1, 0.2, 0.0], StudyLevel::Micro).is_err());
        assert!(study_delta(&cfg, &[0.2, 0.1], StudyLevel::Micro).is_err());
    }

    #[test]
    fn single_eps_list_is_too_short() {
        let cfg = ProblemConfig::from_toml_str(crate::config::EXAMPLE_S1_TOML).unwrap();
        assert!(matches!(
            study_eps(&cfg, &[0.25], ScalingChoice::S1),
            Err(Error::SweepTooShort { .. })
        ));
    }

    fn coarse_s1() -> ProblemConfig {
        let mut cfg = ProblemConfig::from_toml_str(crate::config::EXAMPLE_S1_TOML).unwrap();
        cfg.mesh.edge = 0.05;
        cfg.mesh.cell_edge = 0.1;
        cfg.mesh.n_sigma = 4;
        cfg.time.t_end = 0.05;
        cfg.time.dt = 0.025;
        cfg
    }

    #[test]
    fn zero_coupling_errors_are_flat() {
        // compatible constant data: the micro solution is eps-independent
        // and equals the limit model's bulk fields, so the sweep errors sit
        // at the discretization floor for every eps
        let mut cfg = coarse_s1();
        let c = 0.6;
        cfg.sources = Default::default();
        cfg.sources.u_left = crate::problem::BoundaryTrace::constant(c);
        cfg.sources.u_right = crate::problem::BoundaryTrace::constant(c);
        cfg.sources.h_l = crate::problem::constant_fn(c);
        cfg.sources.h_r = crate::problem::constant_fn(c);
        cfg.sources.h_m = crate::problem::constant_fn(c);
        let report = study_eps(&cfg, &[0.5, 0.25, 0.125], ScalingChoice::S1).unwrap();
        for m in &report.members {
            assert!(m.err_l < 1e-8, "err_l = {} at eps {}", m.err_l, m.value);
            assert!(m.err_r < 1e-8, "err_r = {} at eps {}", m.err_r, m.value);
        }
    }

    #[test]
    fn s2_sweep_energies_stay_in_band() {
        let mut cfg = coarse_s1();
        cfg.scalings = crate::problem::ScalingExponents::new(-1.0, 0.5, 0.5, 0.0);
        cfg.sources = Default::default();
        cfg.sources.u_left = crate::problem::BoundaryTrace::constant(1.0);
        let report = study_eps(&cfg, &[0.5, 0.25, 0.125], ScalingChoice::S2).unwrap();
        for band in report.energy_bands() {
            assert!(band <= 4.0, "energy band {band} exceeds 4");
        }
    }

    #[test]
    fn halving_delta_contracts_consecutive_solutions() {
        // delta-stability: the distance between successive regularization
        // levels shrinks as delta halves
        let mut cfg = coarse_s1();
        cfg.coefficients.b_l = [0.6, 0.2];
        cfg.coefficients.b_r = [0.6, 0.2];
        cfg.coefficients.b_m = crate::problem::CellVec::Constant([0.4, 0.3]);
        cfg.sources = Default::default();
        cfg.sources.u_left = crate::problem::BoundaryTrace::constant(0.9);
        let sols: Vec<_> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&d| crate::micro::solve_micro(&cfg.with_delta(d)).unwrap())
            .collect();
        let window = (0.0, cfg.time.t_end);
        let gap01 = l2_error_same_mesh(
            &sols[0].mesh,
            &sols[0].field,
            &sols[1].field,
            RegionTag::Left,
            window,
        )
        .unwrap();
        let gap12 = l2_error_same_mesh(
            &sols[1].mesh,
            &sols[1].field,
            &sols[2].field,
            RegionTag::Left,
            window,
        )
        .unwrap();
        assert!(
            gap12 < gap01,
            "consecutive gaps must shrink: {gap12} vs {gap01}"
        );
    }

    #[test]
    fn duplicate_deltas_dedupe_and_zero_drift_gives_zero_errors() {
        let mut cfg = coarse_s1();
        cfg.sources = Default::default();
        cfg.sources.u_left = crate::problem::BoundaryTrace::constant(1.0);
        // drift coefficients are zero in the template, so delta is
        // irrelevant and all distances vanish
        let report = study_delta(&cfg, &[0.2, 0.1, 0.1, 0.0], StudyLevel::Micro).unwrap();
        assert!(!report.warnings.is_empty(), "duplicate delta should warn");
        assert_eq!(report.members.len(), 2);
        for m in &report.members {
            assert!(m.err_l < 1e-12 && m.err_r < 1e-12 && m.err_layer_avg < 1e-12);
        }
    }
}
