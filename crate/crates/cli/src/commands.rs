use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ntsdr::baseline::{fit_gsir, gcv_gsir, tune_gsir, GsirModel};
use ntsdr::bench::{run_bench, write_bench_csv, BenchConfig};
use ntsdr::cp::{fit_cp_prepared, CpConfig};
use ntsdr::feature::{PreparedData, SampleSet};
use ntsdr::io::{read_dataset, write_dataset, Dataset, ModelFile, SavedModel, Storage};
use ntsdr::link::{KernelRidge, LogLink};
use ntsdr::linalg::Mat;
use ntsdr::model::FittedModel;
use ntsdr::operator::RegularizationParams;
use ntsdr::simgen::{generate, SimConfig};
use ntsdr::tucker::{fit_tucker_prepared, TuckerConfig};
use ntsdr::tuning::{grid_search_prepared, GridPoint, Method, TuningGrid};
use ntsdr::{NtsdrError, Result};
use serde::Serialize;

use crate::{FitArgs, GridArgs, LinkArg, MethodArg, MethodArgs, RhoArgs};

const RIDGE_LAMBDA: f64 = 1e-3;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn simulate(config: &Path, out_dir: &Path, rep: usize, storage: Storage) -> Result<()> {
    let cfg: SimConfig = read_json(config)?;
    cfg.validate()?;
    let data = generate(&cfg, rep)?;
    if data.clipped > 0 {
        log::warn!("{} generated sums clipped below the log singularity", data.clipped);
    }
    write_dataset(out_dir, &data.train.xs, &data.train.y, Some(&data.train_signal), storage)?;
    write_dataset(&out_dir.join("test"), &data.test_x, &data.test_y, Some(&data.test_signal), storage)?;
    Ok(())
}

/// Estimator choice with its dimensions checked against the flags given.
enum Estimator {
    Tucker { s: usize, t: usize },
    Cp { d: usize },
    Gsir { d: usize },
}

fn estimator(m: &MethodArgs) -> Result<Estimator> {
    let reject = |flag: &str| {
        Err(NtsdrError::validation(
            flag,
            format!("not used by method {:?}", m.method).to_lowercase(),
        ))
    };
    match m.method {
        MethodArg::Tucker => {
            if m.d.is_some() {
                return reject("d");
            }
            let (s, t) = (m.s.unwrap_or(1), m.t.unwrap_or(1));
            if s == 0 || t == 0 {
                return Err(NtsdrError::validation("s/t", "Tucker dimensions must be at least 1"));
            }
            Ok(Estimator::Tucker { s, t })
        }
        MethodArg::Cp | MethodArg::Gsir => {
            if m.s.is_some() || m.t.is_some() {
                return reject("s/t");
            }
            let d = m.d.unwrap_or(1);
            if d == 0 {
                return Err(NtsdrError::validation("d", "number of predictors must be at least 1"));
            }
            Ok(if m.method == MethodArg::Cp {
                Estimator::Cp { d }
            } else {
                Estimator::Gsir { d }
            })
        }
    }
}

fn tuning_grid(grid: &GridArgs, rho: RhoArgs) -> Result<TuningGrid> {
    let default = TuningGrid::default();
    TuningGrid::new(
        grid.eta_grid.as_deref().unwrap_or(&default.eta_grid),
        grid.eps_grid.as_deref().unwrap_or(&default.eps_grid),
        [rho.rho_u, rho.rho_v, rho.rho_y],
    )
}

fn ntsdr_method(est: &Estimator, seed: u64) -> Option<Method> {
    match *est {
        Estimator::Tucker { s, t } => {
            let mut cfg = TuckerConfig::new(s, t);
            cfg.seed = seed;
            Some(Method::Tucker(cfg))
        }
        Estimator::Cp { d } => Some(Method::Cp(CpConfig::new(d))),
        Estimator::Gsir { .. } => None,
    }
}

#[derive(Debug, Serialize)]
struct FitReport {
    method: &'static str,
    n: usize,
    p: usize,
    q: usize,
    predictors: usize,
    rho: [f64; 3],
    tuned: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reg: Option<RegularizationParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gsir_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gcv_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gcv_estimator: Option<f64>,
    /// Tucker objective per sweep, CP pair values, or GSIR eigenvalues.
    objective_trace: Vec<f64>,
    iterations: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    link: &'static str,
    seed: u64,
    wall_time_s: f64,
}

struct Fitted {
    model: SavedModel,
    tuned_gcv: Option<(f64, f64)>,
    gsir_eps: Option<f64>,
}

fn fit_ntsdr(method: &Method, args: &FitArgs, prep: &PreparedData) -> Result<Fitted> {
    if args.tune {
        let grid = tuning_grid(&args.grid, args.rho)?;
        let res = grid_search_prepared(method, &grid, prep)?;
        return Ok(Fitted {
            model: res.model.into(),
            tuned_gcv: Some((res.gcv_r, res.gcv_estimator)),
            gsir_eps: None,
        });
    }
    let reg = RegularizationParams::new(args.eta_u, args.eta_v, args.eps_u, args.eps_v)?;
    let model = match method {
        Method::Tucker(cfg) => {
            let mut cfg = cfg.clone();
            cfg.reg = reg;
            FittedModel::Tucker(fit_tucker_prepared(prep, &cfg)?)
        }
        Method::Cp(cfg) => {
            let mut cfg = cfg.clone();
            cfg.reg = reg;
            FittedModel::Cp(fit_cp_prepared(prep, &cfg)?)
        }
    };
    Ok(Fitted {
        model: model.into(),
        tuned_gcv: None,
        gsir_eps: None,
    })
}

fn fit_baseline(d: usize, args: &FitArgs, samples: &SampleSet) -> Result<Fitted> {
    let rho = args.rho;
    let model: GsirModel = if args.tune {
        let grid = tuning_grid(&args.grid, rho)?.normalized()?;
        tune_gsir(samples, d, rho.rho_u, rho.rho_y, &grid.eps_grid)?
    } else {
        fit_gsir(samples, d, rho.rho_u, rho.rho_y, args.eps_u)?
    };
    Ok(Fitted {
        gsir_eps: Some(model.eps),
        model: SavedModel::Gsir(model),
        tuned_gcv: None,
    })
}

fn report_path(args: &FitArgs) -> PathBuf {
    args.report.clone().unwrap_or_else(|| {
        let mut name = args.out.file_stem().unwrap_or_default().to_os_string();
        name.push(".report.json");
        args.out.with_file_name(name)
    })
}

fn attach_link(file: &mut ModelFile, link: LinkArg, data: &Dataset, train_pred: &Mat) -> Result<&'static str> {
    let kind = match link {
        LinkArg::Auto if data.signal.is_some() => LinkArg::Log,
        LinkArg::Auto => LinkArg::Ridge,
        other => other,
    };
    Ok(match kind {
        LinkArg::Log => {
            file.link = Some(LogLink::fit(train_pred, &data.y)?);
            "log"
        }
        LinkArg::Ridge => {
            file.regressor = Some(KernelRidge::fit(train_pred, &data.y, 1.0, RIDGE_LAMBDA)?);
            "ridge"
        }
        _ => "none",
    })
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let est = estimator(&args.method)?;
    let data = read_dataset(&args.data_dir)?;
    let samples = data.samples()?;
    let rho = [args.rho.rho_u, args.rho.rho_v, args.rho.rho_y];
    let start = Instant::now();
    let fitted = match ntsdr_method(&est, args.seed) {
        Some(method) => {
            let prep = PreparedData::new(&samples, rho)?;
            fit_ntsdr(&method, args, &prep)?
        }
        None => {
            let Estimator::Gsir { d } = est else { unreachable!() };
            fit_baseline(d, args, &samples)?
        }
    };
    let train_pred = fitted.model.predict(&samples.xs)?;
    let mut file = ModelFile::new(fitted.model);
    let link = attach_link(&mut file, args.link, &data, &train_pred)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let (objective_trace, iterations, converged, reg) = match &file.model {
        SavedModel::Tucker(m) => (m.objective_trace.clone(), vec![m.iterations], Some(m.converged), Some(m.reg)),
        SavedModel::Cp(m) => (m.eigenvalue_trace.clone(), m.iterations.clone(), None, Some(m.reg)),
        SavedModel::Gsir(m) => (m.eigenvalues.clone(), Vec::new(), None, None),
    };
    let report = FitReport {
        method: file.model.method_name(),
        n: samples.n(),
        p: samples.p(),
        q: samples.q(),
        predictors: train_pred.ncols(),
        rho,
        tuned: args.tune,
        reg,
        gsir_eps: fitted.gsir_eps,
        gcv_r: fitted.tuned_gcv.map(|g| g.0),
        gcv_estimator: fitted.tuned_gcv.map(|g| g.1),
        objective_trace,
        iterations,
        converged,
        link,
        seed: args.seed,
        wall_time_s,
    };
    file.save(&args.out)?;
    write_json(&report_path(args), &report)?;
    Ok(())
}

pub fn predict(model: &Path, data_dir: &Path, out: &Path) -> Result<()> {
    let file = ModelFile::load(model)?;
    let data = read_dataset(data_dir)?;
    let pred = file.model.predict(&data.xs)?;
    let y_hat = file.response(&pred)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| NtsdrError::Format(format!("{}: {e}", out.display())))?;
    let err = |e: csv::Error| NtsdrError::Format(format!("prediction csv: {e}"));
    let mut header = file.model.column_names();
    if y_hat.is_some() {
        header.push("y_hat".into());
    }
    w.write_record(&header).map_err(err)?;
    for a in 0..pred.nrows() {
        let mut row: Vec<String> = pred.row(a).iter().map(|v| v.to_string()).collect();
        if let Some(y) = &y_hat {
            row.push(y[a].to_string());
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct GsirPoint {
    eps: f64,
    score: f64,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum TuningReport {
    Ntsdr {
        method: &'static str,
        reg: RegularizationParams,
        gcv_r: f64,
        gcv_estimator: f64,
        evaluations: Vec<GridPoint>,
    },
    Gsir {
        method: &'static str,
        eps: f64,
        evaluations: Vec<GsirPoint>,
    },
}

pub fn tune(data_dir: &Path, method: &MethodArgs, grid: &GridArgs, rho: RhoArgs, seed: u64, out: &Path) -> Result<()> {
    let est = estimator(method)?;
    let data = read_dataset(data_dir)?;
    let samples = data.samples()?;
    let grid = tuning_grid(grid, rho)?.normalized()?;
    let report = match ntsdr_method(&est, seed) {
        Some(m) => {
            let prep = PreparedData::new(&samples, grid.rho)?;
            let res = grid_search_prepared(&m, &grid, &prep)?;
            TuningReport::Ntsdr {
                method: res.model.method_name(),
                reg: res.reg,
                gcv_r: res.gcv_r,
                gcv_estimator: res.gcv_estimator,
                evaluations: res.evaluations,
            }
        }
        None => {
            let evaluations: Vec<GsirPoint> = grid
                .eps_grid
                .iter()
                .map(|&eps| {
                    let score = gcv_gsir(&samples, rho.rho_u, rho.rho_y, eps).unwrap_or(f64::INFINITY);
                    GsirPoint { eps, score }
                })
                .collect();
            let Estimator::Gsir { d } = est else { unreachable!() };
            let model = tune_gsir(&samples, d, rho.rho_u, rho.rho_y, &grid.eps_grid)?;
            TuningReport::Gsir {
                method: "gsir",
                eps: model.eps,
                evaluations,
            }
        }
    };
    write_json(out, &report)
}

pub fn bench(config: &Path, out: &Path) -> Result<()> {
    let cfg: BenchConfig = read_json(config)?;
    let report = run_bench(&cfg)?;
    write_bench_csv(&report.rows, BufWriter::new(File::create(out)?))?;
    if report.failed_cells == cfg.cells.len() {
        return Err(NtsdrError::TuningFailure("every benchmark cell failed".into()));
    }
    Ok(())
}
