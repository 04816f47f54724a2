//! Command-line front end: load problem definitions from JSON, run the
//! spectral computations, and emit tables, CSV, and JSON.
//!
//! Exit codes: 0 success, 1 file/schema errors, 2 numeric failures,
//! 3 a Gelfand-Levitan table finished with flagged rows.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use sl_lab::output::{fmt12, parallel_map, write_csv, write_json};
use sl_lab::schema::{parse_complex, ProblemFile};
use sl_lab_core::criteria::{self, RootScanConfig, ScanConfig};
use sl_lab_core::glevitan::{self, BuiltKernel, GlError};
use sl_lab_core::herglotz::stieltjes_invert;
use sl_lab_core::krein;
use sl_lab_core::weyl;
use sl_lab_core::Complex64;

#[derive(Parser)]
#[command(
    name = "sl-lab",
    about = "Weyl-Titchmarsh m-functions, similarity diagnostics, Krein string transforms, \
             and Gelfand-Levitan potential recovery for half-line problems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the m-coefficient pair on a list of spectral points.
    Mfun {
        /// Problem file path or a built-in name (free, paper-sec5,
        /// paper-sec6.1, paper-sec6.2).
        #[arg(long)]
        file: String,
        /// Spectral points like "1i", "0.5+2i"; repeatable.
        #[arg(long = "lambda")]
        lambdas: Vec<String>,
        /// Weyl-disk radius target.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump the plus-side fundamental-pair mesh of the first lambda to
        /// this CSV path.
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
    },
    /// Boundedness scan of |Im M|/|M+ - M-| toward 0 and infinity.
    Scan {
        #[arg(long)]
        file: String,
        /// Number of decades below 0.1 to cover.
        #[arg(long)]
        eps_decades: Option<usize>,
        #[arg(long)]
        points_per_decade: Option<usize>,
        /// Ray angles in radians, comma separated.
        #[arg(long)]
        rays: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        /// Output basename; writes <out>.json, <out>.near-zero.csv,
        /// <out>.near-inf.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the Krein spectral shift tau -> c + tau to a string.
    StringShift {
        #[arg(long)]
        file: String,
        #[arg(long)]
        c: Option<f64>,
        /// Evaluation grid "start:stop:count".
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the potential from a spectral measure via Gelfand-Levitan.
    Gl {
        #[arg(long)]
        file: String,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a real point as an eigenvalue from the measure pair.
    Eigtest {
        #[arg(long)]
        file: String,
        #[arg(long)]
        lambda0: Option<f64>,
    },
    /// Stieltjes inversion: tabulate the spectral function on an interval.
    Invert {
        #[arg(long)]
        file: String,
        /// "a:b"
        #[arg(long)]
        interval: Option<String>,
        /// Decreasing smoothing parameters, comma separated.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate non-real spectrum: zeros of M+ - M- in a rectangle.
    Roots {
        #[arg(long)]
        file: String,
        /// "re_lo:re_hi:im_lo:im_hi"
        #[arg(long = "box", value_name = "BOX")]
        boxed: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn schema_fail(error: anyhow::Error) -> Failure {
    Failure { code: 1, error }
}

fn numeric_fail(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Mfun {
            file,
            lambdas,
            tol,
            out,
            dump_mesh,
        } => cmd_mfun(&file, &lambdas, tol, out.as_deref(), dump_mesh.as_deref()),
        Command::Scan {
            file,
            eps_decades,
            points_per_decade,
            rays,
            tol,
            out,
        } => cmd_scan(
            &file,
            eps_decades,
            points_per_decade,
            rays,
            tol,
            out.as_deref(),
        ),
        Command::StringShift { file, c, grid, out } => {
            cmd_string_shift(&file, c, grid, out.as_deref())
        }
        Command::Gl {
            file,
            x_max,
            n_points,
            out,
        } => cmd_gl(&file, x_max, n_points, out.as_deref()),
        Command::Eigtest { file, lambda0 } => cmd_eigtest(&file, lambda0),
        Command::Invert {
            file,
            interval,
            eps,
            n,
            out,
        } => cmd_invert(&file, interval, eps, n, out.as_deref()),
        Command::Roots { file, boxed, out } => cmd_roots(&file, boxed, out.as_deref()),
    }
}

fn load(file: &str) -> Result<ProblemFile, Failure> {
    ProblemFile::load(file).map_err(schema_fail)
}

fn cmd_mfun(
    file: &str,
    lambda_args: &[String],
    tol: Option<f64>,
    out: Option<&std::path::Path>,
    dump_mesh: Option<&std::path::Path>,
) -> Result<u8, Failure> {
    let pf = load(file)?;
    let run = pf.run();
    let tol = tol.or(run.tol).unwrap_or(1e-8);
    let texts: Vec<String> = if !lambda_args.is_empty() {
        lambda_args.to_vec()
    } else {
        run.lambdas
            .clone()
            .ok_or_else(|| schema_fail(anyhow!("no --lambda given and no run.lambdas in file")))?
    };
    let lambdas: Vec<Complex64> = texts
        .iter()
        .map(|t| parse_complex(t))
        .collect::<Result<_>>()
        .map_err(schema_fail)?;
    let (plus, minus) = pf.problem_pair().map_err(schema_fail)?;

    if let Some(path) = dump_mesh {
        let lambda = lambdas[0];
        let pair = weyl::integrate_fundamental(&plus, lambda, 32.0, 1e-10)
            .map_err(|e| numeric_fail(anyhow!("{}", e)))?;
        let rows: Vec<Vec<f64>> = pair
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.x,
                    r.c.re,
                    r.c.im,
                    r.c_deriv.re,
                    r.c_deriv.im,
                    r.s.re,
                    r.s.im,
                    r.s_deriv.re,
                    r.s_deriv.im,
                ]
            })
            .collect();
        write_csv(
            path,
            "x,c_re,c_im,c_deriv_re,c_deriv_im,s_re,s_im,s_deriv_re,s_deriv_im",
            &rows,
        )
        .map_err(schema_fail)?;
    }

    let results = parallel_map(lambdas.clone(), |&lambda| match &minus {
        Some(m) => weyl::big_m(&plus, m, lambda, tol).map(|(a, b)| (a, Some(b))),
        None => weyl::m_coefficient(&plus, lambda, tol).map(|a| (a, None)),
    });

    let mut rows: Vec<Vec<f64>> = Vec::new();
    println!("lambda, M_plus, bound_plus, M_minus, bound_minus");
    for (lambda, res) in lambdas.iter().zip(results) {
        let (mp, mm) = res.map_err(|e| numeric_fail(anyhow!("{}", e)))?;
        match &mm {
            Some(mm) => {
                println!(
                    "{}+{}i, {}+{}i, {}, {}+{}i, {}",
                    fmt12(lambda.re),
                    fmt12(lambda.im),
                    fmt12(mp.value.re),
                    fmt12(mp.value.im),
                    fmt12(mp.error_bound),
                    fmt12(mm.value.re),
                    fmt12(mm.value.im),
                    fmt12(mm.error_bound)
                );
                rows.push(vec![
                    lambda.re,
                    lambda.im,
                    mp.value.re,
                    mp.value.im,
                    mp.error_bound,
                    mm.value.re,
                    mm.value.im,
                    mm.error_bound,
                ]);
            }
            None => {
                println!(
                    "{}+{}i, {}+{}i, {}",
                    fmt12(lambda.re),
                    fmt12(lambda.im),
                    fmt12(mp.value.re),
                    fmt12(mp.value.im),
                    fmt12(mp.error_bound)
                );
                rows.push(vec![
                    lambda.re,
                    lambda.im,
                    mp.value.re,
                    mp.value.im,
                    mp.error_bound,
                ]);
            }
        }
    }
    if let Some(path) = out {
        let header = if rows.first().map(|r| r.len()) == Some(8) {
            "lambda_re,lambda_im,m_plus_re,m_plus_im,bound_plus,m_minus_re,m_minus_im,bound_minus"
        } else {
            "lambda_re,lambda_im,m_re,m_im,bound"
        };
        write_csv(path, header, &rows).map_err(schema_fail)?;
    }
    Ok(0)
}

fn cmd_scan(
    file: &str,
    eps_decades: Option<usize>,
    points_per_decade: Option<usize>,
    rays: Option<String>,
    tol: Option<f64>,
    out: Option<&std::path::Path>,
) -> Result<u8, Failure> {
    let pf = load(file)?;
    let run = pf.run();
    let decades = eps_decades.or(run.eps_decades).unwrap_or(7);
    let per_decade = points_per_decade.or(run.points_per_decade).unwrap_or(3);
    let tol = tol.or(run.tol).unwrap_or(1e-6);
    let ray_angles: Vec<f64> = match rays {
        Some(text) => text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| schema_fail(anyhow!("bad ray angle '{}'", t)))
            })
            .collect::<Result<_, _>>()?,
        None => run.rays.clone().unwrap_or_else(|| {
            vec![
                std::f64::consts::FRAC_PI_4,
                std::f64::consts::FRAC_PI_2,
                3.0 * std::f64::consts::FRAC_PI_4,
            ]
        }),
    };
    let (mp, mm) = pf.m_pair(tol).map_err(schema_fail)?;
    let hi = 1e-1;
    let lo = hi * 10f64.powi(-(decades as i32));
    let config = ScanConfig {
        scales: criteria::geometric_scales(lo, hi, per_decade),
        rays: ray_angles,
        ..ScanConfig::default()
    };
    let report = criteria::scan(&mp, &mm, &config).map_err(|e| numeric_fail(anyhow!("{}", e)))?;
    println!("verdict: {}", report.verdict);
    println!(
        "slope near 0: {}   sup near 0: {}",
        report
            .slope_near_zero
            .map(fmt12)
            .unwrap_or_else(|| "n/a".into()),
        fmt12(report.sup_near_zero)
    );
    println!(
        "slope near inf: {}   sup near inf: {}",
        report
            .slope_near_infinity
            .map(fmt12)
            .unwrap_or_else(|| "n/a".into()),
        fmt12(report.sup_near_infinity)
    );
    if let Some(base) = out {
        let report_json = serde_json::json!({
            "verdict": report.verdict.to_string(),
            "slope_near_zero": report.slope_near_zero,
            "slope_near_infinity": report.slope_near_infinity,
            "sup_near_zero": report.sup_near_zero,
            "sup_near_infinity": report.sup_near_infinity,
            "nonreal_candidates": report
                .nonreal_candidates
                .iter()
                .map(|l| vec![l.re, l.im])
                .collect::<Vec<_>>(),
            "kernel_hypothesis_assumed": report.kernel_hypothesis_assumed,
        });
        write_json(&base.with_extension("json"), &report_json).map_err(schema_fail)?;
        let to_rows = |samples: &[criteria::RatioSample]| -> Vec<Vec<f64>> {
            samples
                .iter()
                .map(|s| vec![s.scale, s.theta, s.r_plus, s.r_minus])
                .collect()
        };
        write_csv(
            &base.with_extension("near-zero.csv"),
            "eps,theta,r_plus,r_minus",
            &to_rows(&report.near_zero),
        )
        .map_err(schema_fail)?;
        write_csv(
            &base.with_extension("near-inf.csv"),
            "eps,theta,r_plus,r_minus",
            &to_rows(&report.near_infinity),
        )
        .map_err(schema_fail)?;
    }
    Ok(0)
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(anyhow!("grid must be start:stop:count, got '{}'", text));
    }
    let start: f64 = parts[0].parse()?;
    let stop: f64 = parts[1].parse()?;
    let count: usize = parts[2].parse()?;
    if count < 2 || !(stop > start) {
        return Err(anyhow!("grid must have stop > start and count >= 2"));
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn cmd_string_shift(
    file: &str,
    c: Option<f64>,
    grid: Option<String>,
    out: Option<&std::path::Path>,
) -> Result<u8, Failure> {
    let pf = load(file)?;
    let run = pf.run();
    let c = c
        .or(run.c)
        .ok_or_else(|| schema_fail(anyhow!("no --c given and no run.c in file")))?;
    let name = run
        .string
        .clone()
        .or_else(|| pf.strings.keys().next().cloned())
        .ok_or_else(|| schema_fail(anyhow!("no strings section in file")))?;
    let base = pf.string(&name).map_err(schema_fail)?;
    let shifted = krein::string_shift(&base, c).map_err(|e| numeric_fail(anyhow!("{}", e)))?;
    let grid = match grid {
        Some(g) => parse_grid(&g).map_err(schema_fail)?,
        None => parse_grid("0:100:201").unwrap(),
    };
    let dens = krein::density_of(&shifted, &grid).map_err(|e| numeric_fail(anyhow!("{}", e)))?;
    let mut rows = Vec::with_capacity(grid.len());
    for (x, d) in dens {
        let m = shifted
            .mass(x)
            .map_err(|e| numeric_fail(anyhow!("{}", e)))?;
        rows.push(vec![x, m, d]);
    }
    println!("x, mass, density");
    for row in rows.iter().take(8) {
        println!("{}, {}, {}", fmt12(row[0]), fmt12(row[1]), fmt12(row[2]));
    }
    if rows.len() > 8 {
        println!("... ({} rows total)", rows.len());
    }
    if let Some(base_path) = out {
        write_csv(&base_path.with_extension("csv"), "x,mass,density", &rows)
            .map_err(schema_fail)?;
        let json = serde_json::json!({
            "length": if shifted.length.is_finite() { serde_json::json!(shifted.length) } else { serde_json::Value::Null },
            "samples": rows.iter().map(|r| vec![r[0], r[1]]).collect::<Vec<_>>(),
        });
        write_json(&base_path.with_extension("json"), &json).map_err(schema_fail)?;
    }
    Ok(0)
}

fn cmd_gl(
    file: &str,
    x_max: Option<f64>,
    n_points: Option<usize>,
    out: Option<&std::path::Path>,
) -> Result<u8, Failure> {
    let pf = load(file)?;
    let run = pf.run();
    let x_max = x_max.or(run.x_max).unwrap_or(20.0);
    let n_points = n_points.or(run.n_points).unwrap_or(201);

    let kernel = if let Some(name) = &run.kernel {
        let spec = pf
            .kernels
            .get(name)
            .ok_or_else(|| schema_fail(anyhow!("kernel '{}' not found", name)))?;
        spec.to_kernel().map_err(schema_fail)?
    } else {
        let measure_name = run.measure.clone().unwrap_or_else(|| "tau_plus".into());
        let target = pf.measure(&measure_name).map_err(schema_fail)?;
        let reference = match &run.reference_measure {
            Some(name) => pf.measure(name).map_err(schema_fail)?,
            None => sl_lab_core::builtin::tau_free(),
        };
        match glevitan::build_kernel(&target, &reference, x_max, 65, 1e-8)
            .map_err(|e| numeric_fail(anyhow!("{}", e)))?
        {
            BuiltKernel::Separable(k) => k,
            BuiltKernel::Tabulated(_) => {
                return Err(numeric_fail(anyhow!(
                    "measure difference is not in the finite-rank table; \
                     the equation solver needs a separable kernel"
                )))
            }
        }
    };

    let grid: Vec<f64> = (0..n_points)
        .map(|i| x_max * i as f64 / (n_points - 1) as f64)
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    let mut flagged: Vec<f64> = Vec::new();
    for &x in &grid {
        match glevitan::gl_potential_row(&kernel, x, 1e-11) {
            Ok(sample) => rows.push(vec![sample.x, sample.q, sample.error_estimate]),
            Err(GlError::SingularSystem { .. }) | Err(GlError::UnstableDerivative { .. }) => {
                flagged.push(x);
                rows.push(vec![x, f64::NAN, f64::NAN]);
            }
            Err(e) => return Err(numeric_fail(anyhow!("{}", e))),
        }
    }
    println!("x, q, error_estimate");
    for row in rows.iter().take(8) {
        println!("{}, {}, {}", fmt12(row[0]), fmt12(row[1]), fmt12(row[2]));
    }
    if rows.len() > 8 {
        println!("... ({} rows total)", rows.len());
    }
    if let Some(path) = out {
        write_csv(path, "x,q,error_estimate", &rows).map_err(schema_fail)?;
    }
    if !flagged.is_empty() {
        eprintln!(
            "{} row(s) flagged (singular system or unstable derivative): {:?}",
            flagged.len(),
            flagged
        );
        return Ok(3);
    }
    Ok(0)
}

fn cmd_eigtest(file: &str, lambda0: Option<f64>) -> Result<u8, Failure> {
    let pf = load(file)?;
    let run = pf.run();
    let lambda0 = lambda0.or(run.lambda0).unwrap_or(0.0);
    let tau_plus = pf.measure("tau_plus").map_err(schema_fail)?;
    let tau_minus = pf.measure("tau_minus").map_err(schema_fail)?;
    let report = criteria::eigenvalue_classify(&tau_plus, &tau_minus, lambda0, 1e-6)
        .map_err(|e| numeric_fail(anyhow!("{}", e)))?;
    println!("{}", report.verdict);
    println!("reason: {}", report.reason);
    if let Some((a, b)) = report.p1_signed {
        println!("signed power-1 moments: {}, {}", fmt12(a), fmt12(b));
    }
    if let Some((a, b)) = report.p2 {
        println!("power-2 moments: {}, {}", fmt12(a), fmt12(b));
    }
    if let Some((a, b)) = report.p4_divergent {
        println!("power-4 divergent: {}, {}", a, b);
    }
    Ok(0)
}

fn cmd_invert(
    file: &str,
    interval: Option<String>,
    eps: Option<String>,
    n: Option<usize>,
    out: Option<&std::path::Path>,
) -> Result<u8, Failure> {
    let pf = load(file)?;
    let run = pf.run();
    let interval = match interval {
        Some(text) => {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 2 {
                return Err(schema_fail(anyhow!("interval must be a:b")));
            }
            (
                parts[0]
                    .parse()
                    .map_err(|_| schema_fail(anyhow!("bad interval start")))?,
                parts[1]
                    .parse()
                    .map_err(|_| schema_fail(anyhow!("bad interval end")))?,
            )
        }
        None => run.interval.unwrap_or((0.1, 10.0)),
    };
    let schedule: Vec<f64> = match eps {
        Some(text) => text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| schema_fail(anyhow!("bad eps '{}'", t)))
            })
            .collect::<Result<_, _>>()?,
        None => run.eps_schedule.clone().unwrap_or(vec![0.08, 0.04, 0.02]),
    };
    let n = n.or(run.n_points).unwrap_or(200);
    let (mp, _) = pf.m_pair(run.tol.unwrap_or(1e-6)).map_err(schema_fail)?;
    let inv = stieltjes_invert(&mp, interval, &schedule, n, 0.05)
        .map_err(|e| numeric_fail(anyhow!("{}", e)))?;
    let rows: Vec<Vec<f64>> = inv
        .s
        .iter()
        .zip(&inv.tau)
        .map(|(&s, &t)| vec![s, t])
        .collect();
    println!(
        "s, tau (relative to tau(s0)); max monotonicity drop {}",
        fmt12(inv.max_drop)
    );
    for row in rows.iter().take(8) {
        println!("{}, {}", fmt12(row[0]), fmt12(row[1]));
    }
    if rows.len() > 8 {
        println!("... ({} rows total)", rows.len());
    }
    if let Some(path) = out {
        write_csv(path, "s,tau", &rows).map_err(schema_fail)?;
    }
    Ok(0)
}

fn cmd_roots(
    file: &str,
    boxed: Option<String>,
    out: Option<&std::path::Path>,
) -> Result<u8, Failure> {
    let pf = load(file)?;
    let run = pf.run();
    let corners = match boxed {
        Some(text) => {
            let parts: Vec<f64> = text
                .split(':')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| schema_fail(anyhow!("box must be re_lo:re_hi:im_lo:im_hi")))?;
            if parts.len() != 4 {
                return Err(schema_fail(anyhow!("box must have four numbers")));
            }
            (parts[0], parts[1], parts[2], parts[3])
        }
        None => run.boxed.unwrap_or((0.05, 10.0, 0.05, 10.0)),
    };
    let (mp, mm) = pf.m_pair(run.tol.unwrap_or(1e-6)).map_err(schema_fail)?;
    let roots = criteria::nonreal_roots(
        &mp,
        &mm,
        Complex64::new(corners.0, corners.2),
        Complex64::new(corners.1, corners.3),
        &RootScanConfig::default(),
    )
    .map_err(|e| numeric_fail(anyhow!("{}", e)))?;
    if roots.is_empty() {
        println!("no roots of M+ - M- in the box");
    } else {
        println!("{} root(s):", roots.len());
        for r in &roots {
            println!("{}+{}i", fmt12(r.re), fmt12(r.im));
        }
    }
    if let Some(path) = out {
        let json = serde_json::json!({
            "roots": roots.iter().map(|r| vec![r.re, r.im]).collect::<Vec<_>>(),
        });
        write_json(path, &json).map_err(schema_fail)?;
    }
    Ok(0)
}
