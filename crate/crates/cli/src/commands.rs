use std::path::PathBuf;

use levymor::*;
use log::info;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, read_system, row_major, write_json, Csv};

/// Full system, the noise driving it and its covariance.
pub struct Setup {
    pub system: StateSpaceSystem,
    pub noise: NoiseSpec,
    pub q_m: DMatrix<f64>,
}

impl Setup {
    pub fn load(config: &RunConfig) -> CliResult<Self> {
        config.validate()?;
        let (system, file_q) = match &config.system {
            Some(path) => {
                let rec = read_system(path)?;
                (rec.to_system()?, rec.q_m()?)
            }
            None => {
                info!("assembling wave system, n = {}", config.wave.n);
                (assemble_wave(&config.wave)?, None)
            }
        };
        let noise = match (&config.noise, &file_q) {
            (Some(spec), _) => spec.clone(),
            (None, Some(q)) => {
                let mut spec = NoiseSpec::wiener(q.nrows());
                spec.covariance_override =
                    Some(q.row_iter().map(|r| r.iter().copied().collect()).collect());
                spec
            }
            (None, None) => NoiseSpec::reference(),
        };
        let q_m = covariance(&noise)?;
        if q_m.nrows() != system.m() {
            return Err(CliError::Invalid(format!(
                "noise has {} components but the system has {} inputs",
                q_m.nrows(),
                system.m()
            )));
        }
        Ok(Self { system, noise, q_m })
    }

    /// Balanced realization of the pruned system.
    pub fn balance(&self, config: &RunConfig) -> CliResult<(BalancedRealization, Vec<usize>)> {
        let (pruned, kept) = self.system.prune_structural(config.prune_tol);
        if pruned.n() < self.system.n() {
            info!("pruned {} -> {} states", self.system.n(), pruned.n());
        }
        Ok((balance_system(&pruned, &self.q_m)?, kept))
    }
}

#[derive(Serialize)]
struct RomFile {
    method: Method,
    r: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    a22_cond: Option<f64>,
    #[serde(flatten)]
    system: SystemRecord,
}

pub fn assemble(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let setup = Setup::load(config)?;
    let rec = setup.system.to_record(Some(&setup.q_m));
    Ok(vec![write_json(&config.out, "system.json", config, &rec)?])
}

pub fn gramians(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    #[derive(Serialize)]
    struct GramianFile {
        n: usize,
        kept_states: Vec<usize>,
        spectral_abscissa: f64,
        p: Vec<f64>,
        q: Vec<f64>,
        hsv: Vec<f64>,
    }
    let setup = Setup::load(config)?;
    let (pruned, kept) = setup.system.prune_structural(config.prune_tol);
    let g = GramianSet::compute(&pruned, &setup.q_m, false)?;
    let hsv = hankel_singular_values(&g.p, &g.q)?;
    let file = GramianFile {
        n: pruned.n(),
        kept_states: kept,
        spectral_abscissa: spectral_abscissa(&pruned.a)?,
        p: row_major(&g.p),
        q: row_major(&g.q),
        hsv: hsv.iter().copied().collect(),
    };
    Ok(vec![
        write_json(&config.out, "gramians.json", config, &file)?,
        hsv_csv(config, &hsv).write(&config.out, "hsv.csv")?,
    ])
}

fn hsv_csv(config: &RunConfig, hsv: &DVector<f64>) -> Csv {
    let mut csv = Csv::new(config, &["index", "sigma"]);
    for (i, s) in hsv.iter().enumerate() {
        csv.row(i + 1, &[*s]);
    }
    csv
}

fn required_order(config: &RunConfig) -> CliResult<usize> {
    config
        .r
        .ok_or_else(|| CliError::Invalid("this command needs --r".into()))
}

pub fn reduce_cmd(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let r = required_order(config)?;
    let setup = Setup::load(config)?;
    let (bal, _) = setup.balance(config)?;
    let rom = reduce(&bal, config.method, r)?;
    if rom.ill_conditioned() {
        log::warn!(
            "A22 is ill conditioned (1-norm condition {:e})",
            rom.a22_cond.unwrap_or(f64::NAN)
        );
    }
    let file = RomFile {
        method: config.method,
        r,
        a22_cond: rom.a22_cond,
        system: rom.system.to_record(Some(&setup.q_m)),
    };
    Ok(vec![
        write_json(
            &config.out,
            &format!("rom_{}_r{r}.json", config.method),
            config,
            &file,
        )?,
        hsv_csv(config, &bal.hsv).write(&config.out, "hsv.csv")?,
    ])
}

pub fn bound(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let setup = Setup::load(config)?;
    let (bal, _) = setup.balance(config)?;
    let ctx = bal.bound_context(&setup.q_m)?;
    let mut csv = Csv::new(config, &["r", "method", "bound_theorem", "bound_general"]);
    for r in config.orders() {
        for method in [Method::Bt, Method::Spa] {
            let (_, rep) = bound_report(&ctx, &bal, method, r)?;
            csv.row(format!("{r},{method}"), &[rep.eps_theorem, rep.eps_general]);
        }
    }
    Ok(vec![csv.write(&config.out, "bounds.csv")?])
}

pub fn simulate(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let setup = Setup::load(config)?;
    let opts = config.mc_options(config.samples);
    let steps = opts.steps()?;
    let times = opts.times(steps);
    let path = sample_path(&setup.noise, opts.dt, steps, opts.seed, 0)?;
    let trajectory = |sys: &StateSpaceSystem, method: Integrator| -> CliResult<Csv> {
        let y = integrate(sys, &path, &DVector::zeros(sys.n()), method)?;
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=sys.p()).map(|i| format!("y{i}")))
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(config, &header);
        for (k, t) in times.iter().enumerate() {
            let row: Vec<f64> = y.column(k).iter().copied().collect();
            csv.row(fmt_f64(*t), &row);
        }
        Ok(csv)
    };
    let mut paths =
        vec![trajectory(&setup.system, opts.full_method)?.write(&config.out, "trajectory.csv")?];

    if let Some(r) = config.r {
        let (bal, _) = setup.balance(config)?;
        let rom = reduce(&bal, config.method, r)?.system;
        paths.push(trajectory(&rom, opts.rom_method)?.write(
            &config.out,
            &format!("trajectory_{}_r{r}.csv", config.method),
        )?);
        if config.samples > 0 {
            let curve = mc_error_curves(&bal.system, &[&rom], &setup.noise, &opts)?
                .pop()
                .expect("one curve per reduced model");
            let mut csv = Csv::new(config, &["t", "mean_err", "std_err"]);
            for k in 0..curve.times.len() {
                csv.row(
                    fmt_f64(curve.times[k]),
                    &[curve.mean_err[k], curve.std_err[k]],
                );
            }
            paths.push(csv.write(&config.out, &format!("error_{}_r{r}.csv", config.method))?);
        }
    }
    Ok(paths)
}

pub fn table(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let setup = Setup::load(config)?;
    let (bal, _) = setup.balance(config)?;
    let ctx = bal.bound_context(&setup.q_m)?;
    let orders = config.orders();
    let mut roms = Vec::new();
    let mut bounds = Vec::new();
    for &r in &orders {
        for method in [Method::Bt, Method::Spa] {
            let (rom, rep) = bound_report(&ctx, &bal, method, r)?;
            roms.push(rom.system);
            bounds.push(rep.eps_theorem);
        }
    }
    let csv = if config.samples == 0 {
        let mut csv = Csv::new(config, &["r", "bound_bt", "bound_spa"]);
        for (i, r) in orders.iter().enumerate() {
            csv.row(r, &[bounds[2 * i], bounds[2 * i + 1]]);
        }
        csv
    } else {
        let refs: Vec<&StateSpaceSystem> = roms.iter().collect();
        info!(
            "Monte Carlo over {} samples for {} reduced models",
            config.samples,
            refs.len()
        );
        let curves = mc_error_curves(
            &bal.system,
            &refs,
            &setup.noise,
            &config.mc_options(config.samples),
        )?;
        let est: Vec<McErrorEstimate> = curves.iter().map(ErrorCurve::estimate).collect();
        let mut csv = Csv::new(
            config,
            &[
                "r",
                "err_bt",
                "se_bt",
                "bound_bt",
                "err_spa",
                "se_spa",
                "bound_spa",
            ],
        );
        for (i, r) in orders.iter().enumerate() {
            let (bt, spa) = (&est[2 * i], &est[2 * i + 1]);
            csv.row(
                r,
                &[
                    bt.sup_mean_error,
                    bt.std_error_at_argmax,
                    bounds[2 * i],
                    spa.sup_mean_error,
                    spa.std_error_at_argmax,
                    bounds[2 * i + 1],
                ],
            );
        }
        csv
    };
    Ok(vec![csv.write(&config.out, "table.csv")?])
}

/// The balanced three-state example: its HSVs and both order-2 reduced models with their
/// Gramians and bounds.
pub fn demo3x3(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    #[derive(Serialize)]
    struct RomSummary {
        method: Method,
        system: SystemRecord,
        reachability_gramian: Vec<f64>,
        observability_gramian: Vec<f64>,
        hsv: Vec<f64>,
        bound: f64,
    }
    #[derive(Serialize)]
    struct Demo {
        system: SystemRecord,
        hsv: Vec<f64>,
        reduced: Vec<RomSummary>,
    }
    let sys = example3x3();
    let q_m = DMatrix::identity(1, 1);
    let bal = balance_system(&sys, &q_m)?;
    let ctx = bal.bound_context(&q_m)?;
    let mut reduced = Vec::new();
    for method in [Method::Bt, Method::Spa] {
        let (rom, rep) = bound_report(&ctx, &bal, method, 2)?;
        let p = reachability_gramian(&rom.system, &q_m)?;
        let q = observability_gramian(&rom.system)?;
        reduced.push(RomSummary {
            method,
            system: rom.system.to_record(None),
            hsv: hankel_singular_values(&p, &q)?.iter().copied().collect(),
            reachability_gramian: row_major(&p),
            observability_gramian: row_major(&q),
            bound: rep.eps_theorem,
        });
    }
    let demo = Demo {
        system: sys.to_record(Some(&q_m)),
        hsv: bal.hsv.iter().copied().collect(),
        reduced,
    };
    Ok(vec![write_json(
        &config.out,
        "demo3x3.json",
        config,
        &demo,
    )?])
}

/// `A_ij = -b_i b_j / (b_i + b_j)` with `B = Cᵀ = b = (4, 2, 1)ᵀ`; both Gramians equal
/// `diag(4, 2, 1)`.
pub fn example3x3() -> StateSpaceSystem {
    let b = [4.0, 2.0, 1.0];
    let a = DMatrix::from_fn(3, 3, |i, j| -b[i] * b[j] / (b[i] + b[j]));
    let bm = DMatrix::from_column_slice(3, 1, &b);
    StateSpaceSystem::new(a, bm.clone(), bm.transpose()).expect("example dimensions agree")
}
