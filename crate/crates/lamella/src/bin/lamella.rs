//! Command-line front end: micro runs, limit-model runs, sweep studies,
//! config validation and CSV plotting.

use clap::{Parser, Subcommand, ValueEnum};
use lamella::config::ProblemConfig;
use lamella::error::{Error, Result};
use lamella::micro::{diagnostics_csv, energy_report, solve_micro};
use lamella::plot::{line_plot_svg, Series};
use lamella::problem::ScalingChoice;
use lamella::study::{study_delta, study_eps, ConvergenceReport, StudyLevel};
use lamella::upscaled::{
    s1::flux_balance_csv, solve_macro_s1, solve_macro_s2, solve_macro_s3s4,
};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "lamella", version, about = "Reaction-diffusion-drift transport across perforated thin layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChoiceArg {
    S1,
    S2,
    S3,
    S4,
}

impl From<ChoiceArg> for ScalingChoice {
    fn from(c: ChoiceArg) -> Self {
        match c {
            ChoiceArg::S1 => ScalingChoice::S1,
            ChoiceArg::S2 => ScalingChoice::S2,
            ChoiceArg::S3 => ScalingChoice::S3,
            ChoiceArg::S4 => ScalingChoice::S4,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Micro,
    Macro,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the eps-dependent micro problem and write field snapshots,
    /// energies and solver diagnostics.
    RunMicro {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one of the upscaled limit models (S1, S2, S3, S4).
    RunMacro {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        choice: ChoiceArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// eps-sweep comparing micro and limit-model solutions.
    StudyEps {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated eps values, e.g. 0.25,0.125,0.0625
        #[arg(long)]
        eps: String,
        #[arg(long, value_enum)]
        choice: ChoiceArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// delta-sweep against the non-regularized drift (delta = 0).
    StudyDelta {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated descending delta values terminating in 0
        #[arg(long)]
        deltas: String,
        #[arg(long, value_enum)]
        level: LevelArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check admissibility rules and report the scaling classification.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render CSV columns as a (log-log) SVG line plot.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// x column name
        #[arg(long, default_value = "sweep_value")]
        x: String,
        /// Comma-separated y column names
        #[arg(long, default_value = "err_L,err_R")]
        y: String,
        #[arg(long)]
        out: PathBuf,
        /// Linear axes instead of log-log
        #[arg(long)]
        linear: bool,
    },
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{p}' in {what}")))
        })
        .collect()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn nodal_csv(mesh: &lamella::mesh::TaggedMesh, v: &[f64], u: &[f64]) -> String {
    let mut out = String::from("node,x,y,v,u\n");
    for (i, p) in mesh.vertices.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            i, p[0], p[1], v[i], u[i]
        ));
    }
    out
}

fn mesh_snapshot(mesh: &lamella::mesh::TaggedMesh, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut buf = Vec::new();
    mesh.write_snapshot(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn run_meta(config_path: &Path, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("config = {}\n", config_path.display()));
    for (k, v) in extra {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

fn study_outputs(
    out: &Path,
    report: &ConvergenceReport,
    config_path: &Path,
    extra: &[(&str, String)],
) -> Result<()> {
    write(&out.join("report.csv"), &report.report_csv())?;
    write(&out.join("timing.csv"), &report.timing_csv())?;
    let series = vec![
        Series {
            name: "err_L",
            points: report.members.iter().map(|m| (m.value, m.err_l)).collect(),
        },
        Series {
            name: "err_R",
            points: report.members.iter().map(|m| (m.value, m.err_r)).collect(),
        },
        Series {
            name: "err_layer_avg",
            points: report
                .members
                .iter()
                .map(|m| (m.value, m.err_layer_avg))
                .collect(),
        },
    ];
    let svg = line_plot_svg(
        &format!("L2 errors vs {}", report.parameter),
        report.parameter,
        "L2 error",
        &series,
        true,
    );
    write(&out.join("report.svg"), &svg)?;
    let mut meta = run_meta(config_path, extra);
    if let Some(r) = report.rate_l {
        meta.push_str(&format!("rate_L = {r:.4}\n"));
    }
    if let Some(r) = report.rate_r {
        meta.push_str(&format!("rate_R = {r:.4}\n"));
    }
    for w in &report.warnings {
        meta.push_str(&format!("warning = {w}\n"));
    }
    write(&out.join("run_meta.txt"), &meta)?;
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::RunMicro { config, out } => {
            let cfg = ProblemConfig::from_file(&config)?;
            let sol = solve_micro(&cfg)?;
            mesh_snapshot(&sol.mesh, &out.join("mesh.txt"))?;
            write(&out.join("tag_stats.csv"), &sol.mesh.tag_stats_csv())?;
            for k in 0..sol.field.len() {
                let u = sol.physical(k);
                write(
                    &out.join(format!("field_{k:04}.csv")),
                    &nodal_csv(&sol.mesh, &sol.field.values[k], &u),
                )?;
            }
            let energy = energy_report(&sol, &cfg.scalings, &cfg.drift);
            write(
                &out.join("energies.csv"),
                &format!(
                    "e1,e2,e3,e4\n{:.12e},{:.12e},{:.12e},{:.12e}\n",
                    energy.e1, energy.e2, energy.e3, energy.e4
                ),
            )?;
            write(&out.join("solver_diag.csv"), &diagnostics_csv(&sol.diagnostics))?;
            write(
                &out.join("run_meta.txt"),
                &run_meta(
                    &config,
                    &[
                        ("eps", format!("{}", sol.eps)),
                        ("delta", format!("{}", sol.delta)),
                        ("mesh_edge", format!("{}", sol.mesh_edge)),
                        ("dt", format!("{}", sol.dt)),
                        ("vertices", format!("{}", sol.mesh.vertex_count())),
                        ("triangles", format!("{}", sol.mesh.triangle_count())),
                    ],
                ),
            )?;
            println!(
                "run-micro: {} vertices, {} steps -> {}",
                sol.mesh.vertex_count(),
                sol.field.len() - 1,
                out.display()
            );
        }
        Command::RunMacro { config, choice, out } => {
            let cfg = ProblemConfig::from_file(&config)?;
            let choice: ScalingChoice = choice.into();
            match choice {
                ScalingChoice::S1 => {
                    let sol = solve_macro_s1(&cfg)?;
                    mesh_snapshot(&sol.bulk_l_mesh, &out.join("bulk_l_mesh.txt"))?;
                    mesh_snapshot(&sol.bulk_r_mesh, &out.join("bulk_r_mesh.txt"))?;
                    mesh_snapshot(&sol.cell_mesh, &out.join("cell_mesh.txt"))?;
                    let t_final = *sol.bulk_l.times.last().unwrap();
                    let ul: Vec<f64> = sol
                        .bulk_l
                        .last()
                        .iter()
                        .zip(&sol.bulk_l_mesh.vertices)
                        .map(|(v, &x)| v - sol.lift.eval(t_final, x))
                        .collect();
                    let ur: Vec<f64> = sol
                        .bulk_r
                        .last()
                        .iter()
                        .zip(&sol.bulk_r_mesh.vertices)
                        .map(|(v, &x)| v - sol.lift.eval(t_final, x))
                        .collect();
                    write(
                        &out.join("bulk_l_final.csv"),
                        &nodal_csv(&sol.bulk_l_mesh, sol.bulk_l.last(), &ul),
                    )?;
                    write(
                        &out.join("bulk_r_final.csv"),
                        &nodal_csv(&sol.bulk_r_mesh, sol.bulk_r.last(), &ur),
                    )?;
                    let mut cells = String::from("sigma_point,node,y1,y2,v\n");
                    for (j, field) in sol.cell_fields.iter().enumerate() {
                        let last = field.last();
                        for (i, y) in sol.cell_mesh.vertices.iter().enumerate() {
                            cells.push_str(&format!(
                                "{:.12e},{},{:.12e},{:.12e},{:.12e}\n",
                                sol.sigma_points[j], i, y[0], y[1], last[i]
                            ));
                        }
                    }
                    write(&out.join("cells_final.csv"), &cells)?;
                    write(&out.join("flux_balance.csv"), &flux_balance_csv(&sol.balance))?;
                    println!("run-macro S1 -> {}", out.display());
                }
                ScalingChoice::S2 => {
                    let sol = solve_macro_s2(&cfg)?;
                    mesh_snapshot(&sol.mesh, &out.join("mesh.txt"))?;
                    let t_final = *sol.field.times.last().unwrap();
                    let u: Vec<f64> = sol
                        .field
                        .last()
                        .iter()
                        .zip(&sol.mesh.vertices)
                        .map(|(v, &x)| v - sol.lift.eval(t_final, x))
                        .collect();
                    write(
                        &out.join("field_final.csv"),
                        &nodal_csv(&sol.mesh, sol.field.last(), &u),
                    )?;
                    let mut iface = String::from("xbar,v,u\n");
                    let last = sol.field.len() - 1;
                    for (xbar, v) in sol.interface_values(last) {
                        iface.push_str(&format!(
                            "{:.12e},{:.12e},{:.12e}\n",
                            xbar,
                            v,
                            v - sol.lift.eval(t_final, [0.0, xbar])
                        ));
                    }
                    write(&out.join("interface_final.csv"), &iface)?;
                    println!("run-macro S2 -> {}", out.display());
                }
                ScalingChoice::S3 | ScalingChoice::S4 => {
                    let classified = cfg.classify()?;
                    if classified != choice {
                        return Err(Error::Config(format!(
                            "config classifies as {} but --choice {} was requested",
                            classified.name(),
                            choice.name()
                        )));
                    }
                    let sol = solve_macro_s3s4(&cfg)?;
                    mesh_snapshot(&sol.bulk_l_mesh, &out.join("bulk_l_mesh.txt"))?;
                    mesh_snapshot(&sol.bulk_r_mesh, &out.join("bulk_r_mesh.txt"))?;
                    let t_final = *sol.bulk_l.times.last().unwrap();
                    let ul: Vec<f64> = sol
                        .bulk_l
                        .last()
                        .iter()
                        .zip(&sol.bulk_l_mesh.vertices)
                        .map(|(v, &x)| v - sol.lift.eval(t_final, x))
                        .collect();
                    let ur: Vec<f64> = sol
                        .bulk_r
                        .last()
                        .iter()
                        .zip(&sol.bulk_r_mesh.vertices)
                        .map(|(v, &x)| v - sol.lift.eval(t_final, x))
                        .collect();
                    write(
                        &out.join("bulk_l_final.csv"),
                        &nodal_csv(&sol.bulk_l_mesh, sol.bulk_l.last(), &ul),
                    )?;
                    write(
                        &out.join("bulk_r_final.csv"),
                        &nodal_csv(&sol.bulk_r_mesh, sol.bulk_r.last(), &ur),
                    )?;
                    let mut layer = String::from("x1,x2,y2,v\n");
                    for (p, field) in sol.layer_fields.iter().enumerate() {
                        let last = field.last();
                        for (k, &y2) in sol.layer_nodes[p].iter().enumerate() {
                            layer.push_str(&format!(
                                "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                                sol.layer_points[p][0], sol.layer_points[p][1], y2, last[k]
                            ));
                        }
                    }
                    write(&out.join("layer_final.csv"), &layer)?;
                    let mut meta = run_meta(
                        &config,
                        &[
                            ("lambda1", format!("{}", sol.lambda1)),
                            ("lambda2", format!("{}", sol.lambda2)),
                        ],
                    );
                    for w in &sol.warnings {
                        meta.push_str(&format!("warning = {w}\n"));
                    }
                    write(&out.join("run_meta.txt"), &meta)?;
                    println!(
                        "run-macro {} (lambda1 = {}, lambda2 = {}) -> {}",
                        choice.name(),
                        sol.lambda1,
                        sol.lambda2,
                        out.display()
                    );
                }
                ScalingChoice::Unclassified => unreachable!(),
            }
        }
        Command::StudyEps {
            config,
            eps,
            choice,
            out,
        } => {
            let cfg = ProblemConfig::from_file(&config)?;
            let eps_list = parse_list(&eps, "--eps")?;
            let report = study_eps(&cfg, &eps_list, choice.into())?;
            study_outputs(&out, &report, &config, &[("eps_list", eps)])?;
            for m in &report.members {
                println!(
                    "eps {:.6}: err_L {:.3e}, err_R {:.3e}",
                    m.value, m.err_l, m.err_r
                );
            }
            println!("study-eps -> {}", out.display());
        }
        Command::StudyDelta {
            config,
            deltas,
            level,
            out,
        } => {
            let cfg = ProblemConfig::from_file(&config)?;
            let delta_list = parse_list(&deltas, "--deltas")?;
            let level = match level {
                LevelArg::Micro => StudyLevel::Micro,
                LevelArg::Macro => StudyLevel::Macro,
            };
            let report = study_delta(&cfg, &delta_list, level)?;
            study_outputs(&out, &report, &config, &[("delta_list", deltas)])?;
            for m in &report.members {
                println!(
                    "delta {:.6}: err_L {:.3e}, err_R {:.3e}",
                    m.value, m.err_l, m.err_r
                );
            }
            println!("study-delta -> {}", out.display());
        }
        Command::ValidateConfig { config } => {
            let cfg = ProblemConfig::from_file(&config)?;
            let choice = cfg.classify()?;
            println!("classification: {}", choice.name());
            let violations = cfg.validate();
            if violations.is_empty() {
                println!("admissibility: all rules satisfied");
            } else {
                for v in &violations {
                    println!("{v}");
                }
                if violations.iter().any(|v| !v.warning) {
                    std::process::exit(2);
                }
            }
        }
        Command::Plot {
            csv,
            x,
            y,
            out,
            linear,
        } => {
            let text = fs::read_to_string(&csv)?;
            let mut lines = text.lines();
            let header: Vec<&str> = lines
                .next()
                .ok_or_else(|| Error::Config("empty CSV".into()))?
                .split(',')
                .map(str::trim)
                .collect();
            let xcol = header
                .iter()
                .position(|&c| c == x)
                .ok_or_else(|| Error::Config(format!("no column '{x}'")))?;
            let ycols: Vec<(String, usize)> = y
                .split(',')
                .map(|name| {
                    let name = name.trim().to_string();
                    header
                        .iter()
                        .position(|&c| c == name)
                        .map(|idx| (name.clone(), idx))
                        .ok_or_else(|| Error::Config(format!("no column '{name}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for line in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let vals: Vec<f64> = line
                    .split(',')
                    .map(|p| p.trim().parse::<f64>().unwrap_or(f64::NAN))
                    .collect();
                rows.push(vals);
            }
            let series: Vec<Series> = ycols
                .iter()
                .map(|(name, idx)| Series {
                    name,
                    points: rows
                        .iter()
                        .filter(|r| r.len() > *idx && r[xcol].is_finite() && r[*idx].is_finite())
                        .map(|r| (r[xcol], r[*idx]))
                        .collect(),
                })
                .collect();
            let svg = line_plot_svg(
                csv.file_name().and_then(|s| s.to_str()).unwrap_or("plot"),
                &x,
                "value",
                &series,
                !linear,
            );
            write(&out, &svg)?;
            println!("plot -> {}", out.display());
        }
    }
    Ok(())
}
