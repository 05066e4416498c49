use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use sidonor::crystal::{build_lattice, classify_shells, BoxPlacement, Coord, LatticeDomain, ShellOrbit};
use sidonor::donor_model::{
    assemble, auto_shift, band_edges, calibrate_u0, AssemblyOptions, Calibration, CalibrationOptions,
    Interface, ParamError, PotentialSpec, SkParameters, TbHamiltonian,
};
use sidonor::eigensolver::{SolveOutcome, SolverOptions};
use sidonor::hyperfine::{Anchor, PhysicalConstants};
use sidonor::stark::{
    fit_stark, interface_scan, merge_resolvable, probe_orbits, propagate_field_uncertainty, sweep,
    Component, FieldPoint, ProbeOrbit, Scenario, StarkError, StarkFit, SweepSettings,
};

use crate::cache::Cache;
use crate::config::{parse_coord, ConfigError, RunConfig, Sigma};
use crate::manifest::{Manifest, PointStats};
use crate::output::{
    num, write_atomic, Table, FIG2_HEADER, INTERFACE_HEADER, PROBE_HEADER, SHELLS_HEADER, TABLE_HEADER,
};

/// Reference coefficients shipped with the tool.
pub const REFERENCE_TABLE: &str = include_str!("../data/table1_reference.csv");

const DESK_SCALE_NOTE: &str =
    "absolute eta values depend on domain size and parameterization; compare signs and trends, not magnitudes";

/// An eigensolve or calibration that did not reach its tolerance.
#[derive(Debug)]
pub struct ConvergenceError(pub String);

impl fmt::Display for ConvergenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "convergence failure: {}", self.0)
    }
}

impl std::error::Error for ConvergenceError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub manifest: Manifest,
    pub cache: Cache,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out: PathBuf, command: &str) -> Ctx {
        let cache = Cache::new(&out, &cfg.hash, cfg.cache);
        let manifest = Manifest::new(command, &cfg.hash);
        Ctx {
            cfg,
            out,
            manifest,
            cache,
        }
    }

    fn emit(&mut self, name: &str, table: &Table) -> Result<()> {
        table.write(&self.out.join(name))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }
}

fn load_params(cfg: &RunConfig) -> Result<SkParameters<f64>> {
    let p = match &cfg.params {
        None => match cfg.basis {
            sidonor::donor_model::OrbitalBasis::Sp3s => SkParameters::silicon_sp3s(),
            sidonor::donor_model::OrbitalBasis::Sp3d5s => SkParameters::silicon_sp3d5s(),
        },
        Some(path) => match SkParameters::load(path) {
            Ok(p) => p,
            Err(ParamError::Io(e)) => return Err(e).with_context(|| format!("reading {}", path.display())),
            Err(e) => return Err(config_err(format!("model.params {}: {e}", path.display()))),
        },
    };
    if p.basis() != cfg.basis {
        return Err(config_err(format!(
            "model.basis = {} but the parameter file describes {}",
            cfg.basis.name(),
            p.basis().name()
        )));
    }
    Ok(p)
}

fn lattice(cfg: &RunConfig) -> Result<LatticeDomain> {
    build_lattice(cfg.extent, [0, 0, 0], BoxPlacement::Centered).map_err(|e| config_err(format!("crystal.extent: {e}")))
}

fn potential(cfg: &RunConfig, u0: f64) -> PotentialSpec<f64> {
    PotentialSpec {
        u0_ev: u0,
        dielectric: cfg.dielectric,
        field_mv_per_m: [0.0; 3],
        interface: cfg.interface_depth_nm.map(|d| Interface {
            normal: cfg.interface_normal,
            depth_nm: d,
        }),
        coulomb_tail: cfg.coulomb_tail,
    }
}

fn hamiltonian(cfg: &RunConfig, params: &SkParameters<f64>, domain: &LatticeDomain, u0: f64) -> Result<TbHamiltonian<f64>> {
    assemble(
        domain,
        params.basis(),
        params,
        &potential(cfg, u0),
        AssemblyOptions {
            boundary_shift_ev: cfg.boundary_shift_ev,
        },
    )
    .map_err(|e| config_err(format!("model: {e}")))
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        k: cfg.k,
        tol: cfg.tol,
        max_matvecs: cfg.max_iter,
        basis_size: cfg.basis_size,
        seed: cfg.seed,
        filter_degree: cfg.filter_degree,
        cluster_tol: cfg.cluster_tol,
        ..SolverOptions::default()
    }
}

fn sigma(cfg: &RunConfig, params: &SkParameters<f64>) -> f64 {
    match cfg.sigma {
        Sigma::Auto => auto_shift(&band_edges(params)),
        Sigma::Fixed(s) => s,
    }
}

/// Shells within the configured radius and their orbits under the sweep
/// direction, restricted by the shell filter. Ids are assigned before
/// filtering so they do not depend on it.
fn orbits(cfg: &RunConfig, domain: &LatticeDomain) -> Result<(Vec<ShellOrbit>, Vec<ProbeOrbit>)> {
    let shells = classify_shells(domain, cfg.radius_nm);
    let mut orbits = probe_orbits(domain, &shells, cfg.direction);
    if let Some(filter) = &cfg.shells {
        for site in filter {
            if !shells.iter().any(|s| s.contains_relative(domain, *site)) {
                return Err(config_err(format!(
                    "crystal.shells: no shell within {} nm contains {site:?}",
                    cfg.radius_nm
                )));
            }
        }
        orbits.retain(|o| filter.iter().any(|s| shells[o.shell_id].contains_relative(domain, *s)));
    }
    Ok((shells, orbits))
}

pub fn cmd_shells(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let domain = ctx.manifest.stage("lattice", |_| lattice(&cfg))?;
    let (shells, orbits) = orbits(&cfg, &domain)?;
    let mut t = Table::new(SHELLS_HEADER, &["direction_class"]);
    for o in &orbits {
        let s = &shells[o.shell_id];
        t.push(vec![
            o.shell_id.to_string(),
            o.representative[0].to_string(),
            o.representative[1].to_string(),
            o.representative[2].to_string(),
            num(s.distance_nm),
            o.multiplicity().to_string(),
            s.direction_class.label().to_string(),
            o.orbit_id.to_string(),
        ])?;
    }
    ctx.emit("shells.csv", &t)
}

fn run_calibration(ctx: &mut Ctx, h0: &TbHamiltonian<f64>, sigma: f64) -> Result<Calibration> {
    if let Some(c) = ctx.cache.load_json::<Calibration>("calibration.json") {
        log::info!("calibration cache hit: U0 = {} eV", c.u0_ev);
        return Ok(c);
    }
    let cfg = &ctx.cfg;
    let opts = CalibrationOptions {
        target_binding_ev: cfg.target_binding_ev,
        tol_ev: cfg.calibration_tol_ev,
        u0_range_ev: cfg.u0_range_ev,
        max_evaluations: 40,
        sigma_ev: sigma,
    };
    let solver = SolverOptions {
        k: 1,
        ..solver_options(cfg)
    };
    use sidonor::donor_model::CalibrationError as E;
    let c = match calibrate_u0(h0, &opts, &solver) {
        Ok(c) => c,
        Err(e @ (E::NoBracket { .. } | E::NotConverged { .. } | E::Exhausted { .. })) => {
            return Err(ConvergenceError(e.to_string()).into())
        }
        Err(e) => return Err(config_err(e.to_string())),
    };
    ctx.cache.store_json("calibration.json", &c)?;
    Ok(c)
}

/// Zero-field Hamiltonian with U0 from the config or from calibration.
fn calibrated_model(ctx: &mut Ctx) -> Result<(SkParameters<f64>, TbHamiltonian<f64>, f64)> {
    let cfg = ctx.cfg.clone();
    let params = load_params(&cfg)?;
    let domain = ctx.manifest.stage("lattice", |_| lattice(&cfg))?;
    let h0 = ctx.manifest.stage("assemble", |_| hamiltonian(&cfg, &params, &domain, 0.0))?;
    let s = sigma(&cfg, &params);
    let u0 = match cfg.u0_ev {
        Some(u) => u,
        None => {
            let c = {
                let t = std::time::Instant::now();
                let c = run_calibration(ctx, &h0, s);
                ctx.manifest.timings.push(("calibrate".into(), t.elapsed().as_secs_f64()));
                c?
            };
            let u = c.u0_ev;
            ctx.manifest.calibration = Some(c);
            u
        }
    };
    ctx.manifest.u0_ev = Some(u0);
    let spec = PotentialSpec {
        u0_ev: u0,
        ..h0.spec().clone()
    };
    let h = h0.with_potential(&spec).map_err(|e| config_err(e.to_string()))?;
    Ok((params, h, s))
}

pub fn cmd_calibrate(ctx: &mut Ctx) -> Result<()> {
    if ctx.cfg.u0_ev.is_some() {
        ctx.manifest.warn("model.u0_ev is set; calibrate ignores it and searches for the target binding");
        ctx.cfg.u0_ev = None;
    }
    calibrated_model(ctx)?;
    let c = ctx.manifest.calibration.clone().expect("calibration ran");
    write_atomic(&ctx.out.join("calibration.json"), &serde_json::to_vec_pretty(&c)?)?;
    ctx.manifest.outputs.push("calibration.json".into());
    println!("U0 = {} eV, binding {} eV", c.u0_ev, c.binding_ev);
    Ok(())
}

fn stats(e: f64, out: &SolveOutcome<f64>, hit: bool) -> PointStats {
    PointStats {
        field_mv_per_m: e,
        converged: out.converged,
        cache_hit: hit,
        matvecs: out.matvecs,
        restarts: out.restarts,
        energies_ev: out.states.iter().map(|s| s.energy).collect(),
        max_residual_ev: out.states.iter().map(|s| s.residual).fold(0.0, f64::max),
    }
}

fn stark_err(e: StarkError) -> anyhow::Error {
    match e {
        StarkError::NoReference => ConvergenceError(e.to_string()).into(),
        StarkError::BadDirection(_) => config_err(format!("sweep.direction: {e}")),
        StarkError::BadFields(_) => config_err(format!("sweep.fields: {e}")),
        StarkError::NoInterface => config_err("model.interface_depth_nm is required"),
        StarkError::Hyperfine(h) => config_err(h.to_string()),
        other => anyhow!(other),
    }
}

pub fn cmd_sweep(ctx: &mut Ctx) -> Result<()> {
    let (params, h, s) = calibrated_model(ctx)?;
    let cfg = ctx.cfg.clone();
    let domain = h.domain().clone();
    let nb = params.basis().orbitals_per_site();
    let (_, orbits) = orbits(&cfg, &domain)?;
    let scenario = Scenario::new(h, cfg.direction, s, solver_options(&cfg)).map_err(stark_err)?;
    let settings = SweepSettings {
        constants: PhysicalConstants::default(),
        eta: cfg.eta,
        anchor: cfg.anchor.map(|(site, khz)| Anchor { site, khz }),
    };
    let mut log_text = String::new();
    let cache = ctx.cache.clone();
    let t = std::time::Instant::now();
    let mut point_stats = Vec::new();
    let result = sweep(&domain, scenario.direction(), &cfg.fields, &orbits, &settings, |_, e| {
        let (out, hit) = match cache.load_state(e) {
            Some(o) => (o, true),
            None => {
                let o = scenario.solve(e, None)?;
                if let Err(err) = cache.store_state(e, &o) {
                    log::warn!("cache write failed: {err:#}");
                }
                (o, false)
            }
        };
        log_text.push_str(&format!("# field {} MV/m\n", num(e)));
        for line in &out.log {
            log_text.push_str(line);
            log_text.push('\n');
        }
        point_stats.push(stats(e, &out, hit));
        Ok(FieldPoint::from_outcome(e, &out, nb))
    });
    ctx.manifest.timings.push(("solve".into(), t.elapsed().as_secs_f64()));
    ctx.manifest.solver = point_stats;
    write_atomic(&ctx.out.join("convergence.log"), log_text.as_bytes())?;
    ctx.manifest.outputs.push("convergence.log".into());
    let sw = result.map_err(stark_err)?;
    for w in &sw.warnings {
        ctx.manifest.warn(w.clone());
    }
    ctx.manifest.notes.push(DESK_SCALE_NOTE.into());
    ctx.manifest
        .notes
        .push(format!("calibration scale {}; largest member spread {:e}", sw.calibration_scale, sw.max_spread()));

    let t = std::time::Instant::now();
    let merge = merge_resolvable(&sw, cfg.merge_tol);
    for ev in &merge.events {
        ctx.manifest.notes.push(ev.clone());
    }
    let group_of = |orbit_id: usize| {
        sw.orbits
            .iter()
            .position(|o| o.orbit_id == orbit_id)
            .map(|i| merge.group[i])
            .expect("series come from sweep orbits")
    };
    let mut table = Table::new(TABLE_HEADER, &["component"]);
    let mut fig2 = Table::new(FIG2_HEADER, &["component"]);
    let mut unfit = 0usize;
    for series in sw.series() {
        let fit: Option<StarkFit> = if series.samples.len() >= 3 {
            match fit_stark(&series) {
                Ok(f) => Some(f),
                Err(e) => {
                    ctx.manifest.warn(format!("orbit {} {}: {e}", series.orbit_id, series.component));
                    None
                }
            }
        } else {
            unfit += 1;
            None
        };
        if let Some(f) = &fit {
            if f.absolute && series.component == Component::Beta {
                ctx.manifest.warn(format!(
                    "orbit {} beta vanishes at zero field; eta are absolute coefficients",
                    series.orbit_id
                ));
            }
        }
        let a0 = series.alpha0().unwrap_or(0.0);
        let site = series.site;
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        table.push(vec![
            site[0].to_string(),
            site[1].to_string(),
            site[2].to_string(),
            series.component.label().to_string(),
            num(a0),
            opt(fit.map(|f| f.eta2)),
            opt(fit.map(|f| f.eta1)),
            opt(fit.map(|f| f.rms_residual)),
            group_of(series.orbit_id).to_string(),
        ])?;
        let pre = if a0 == 0.0 { 1.0 } else { a0.abs() };
        for (e, rel) in series.relative_change() {
            let bar = fit.map(|f| propagate_field_uncertainty(&f, e, cfg.delta_e) / pre);
            fig2.push(vec![
                series.orbit_id.to_string(),
                series.component.label().to_string(),
                num(e),
                num(rel),
                opt(bar),
            ])?;
        }
    }
    if unfit > 0 {
        ctx.manifest.warn(format!("{unfit} series have fewer than 3 converged fields; coefficients left empty"));
    }
    ctx.manifest.timings.push(("fit".into(), t.elapsed().as_secs_f64()));
    ctx.emit("table1.csv", &table)?;
    ctx.emit("fig2.csv", &fig2)?;
    if cfg.per_probe {
        let mut probes = Table::new(PROBE_HEADER, &["flags"]);
        for r in &sw.records {
            probes.push(probe_row(r))?;
        }
        ctx.emit("probes.csv", &probes)?;
    }
    Ok(())
}

fn probe_row(r: &sidonor::hyperfine::HyperfineRecord) -> Vec<String> {
    let mut row: Vec<String> = r.site.iter().map(|c| c.to_string()).collect();
    row.extend(r.field_mv_per_m.iter().map(|&x| num(x)));
    row.extend(r.components().iter().map(|&x| num(x)));
    row.push(num(r.calibration_scale));
    row.push(r.flags.join(";"));
    row
}

pub fn cmd_interface(ctx: &mut Ctx) -> Result<()> {
    let Some(_) = ctx.cfg.interface_depth_nm else {
        return Err(config_err("interface needs model.interface_depth_nm"));
    };
    let (_, h, s) = calibrated_model(ctx)?;
    let cfg = ctx.cfg.clone();
    let domain = h.domain().clone();
    let probes: Vec<Coord> = {
        let shells = classify_shells(&domain, cfg.radius_nm);
        let mut p: Vec<Coord> = shells
            .iter()
            .filter(|sh| match &cfg.shells {
                None => true,
                Some(f) => f.iter().any(|c| sh.contains_relative(&domain, *c)),
            })
            .flat_map(|sh| sh.members.iter().map(|m| domain.relative(m.index)))
            .collect();
        p.sort_unstable();
        p
    };
    // the field pushes the electron toward the interface
    let toward = cfg.interface_normal.vector().map(|x| -x);
    let scenario = Scenario::new(h, toward, s, solver_options(&cfg)).map_err(stark_err)?;
    let constants = PhysicalConstants::default();
    let pts = ctx
        .manifest
        .stage("scan", |_| interface_scan(&scenario, &cfg.interface_fields, &probes, &constants, cfg.eta).map_err(stark_err))?;
    let mut t = Table::new(INTERFACE_HEADER, &["converged"]);
    let mut map = Table::new(PROBE_HEADER, &["flags"]);
    for p in &pts {
        if !p.converged {
            ctx.manifest.warn(format!("interface point {} MV/m did not converge", p.field_mv_per_m));
        }
        t.push(vec![
            num(p.field_mv_per_m),
            num(p.ground_ev),
            p.excited_ev.map(num).unwrap_or_default(),
            num(p.centroid_nm),
            num(p.donor_density),
            p.converged.to_string(),
        ])?;
        for r in &p.map {
            map.push(probe_row(r))?;
        }
    }
    for w in pts.windows(2) {
        let jump = (w[1].ground_ev - w[0].ground_ev).abs();
        if jump > cfg.level_jump_ev {
            ctx.manifest.warn(format!(
                "ground energy jumps by {jump} eV between {} and {} MV/m",
                w[0].field_mv_per_m, w[1].field_mv_per_m
            ));
        }
    }
    ctx.emit("interface.csv", &t)?;
    ctx.emit("interface_map.csv", &map)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub shift_khz: f64,
    pub uncertainty_khz: f64,
    pub fit: StarkFit,
}

/// Looks up (site, component) in a Table-1-style CSV and evaluates the fit.
pub fn predict(
    table_csv: &str,
    site: Coord,
    component: Component,
    e: f64,
    delta_e: f64,
    alpha0: Option<f64>,
) -> Result<Prediction> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(table_csv.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != TABLE_HEADER {
        return Err(config_err(format!("table header {:?} does not match {:?}", header, TABLE_HEADER)));
    }
    let mut found = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let coord = parse_coord(&format!("{},{},{}", &rec[0], &rec[1], &rec[2])).map_err(|e| config_err(format!("table row {}: {e}", i + 2)))?;
        let comp = Component::parse(&rec[3]).ok_or_else(|| config_err(format!("table row {}: unknown component `{}`", i + 2, &rec[3])))?;
        if coord == site && comp == component {
            if found.is_some() {
                return Err(config_err(format!("table lists {site:?} {component} twice")));
            }
            found = Some(rec);
        }
    }
    let rec = found.ok_or_else(|| config_err(format!("no table row for site {site:?} component {component}")))?;
    let field = |k: usize| -> Result<Option<f64>> {
        let s = &rec[k];
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| config_err(format!("column {} is not a number: `{s}`", TABLE_HEADER[k])))
    };
    let a0 = match alpha0.or(field(4)?) {
        Some(a) => a,
        None => return Err(config_err(format!("row {site:?} {component} has no alpha0_kHz; pass --alpha0"))),
    };
    let (Some(eta2), Some(eta1)) = (field(5)?, field(6)?) else {
        return Err(config_err(format!("row {site:?} {component} has no coefficients")));
    };
    let fit = StarkFit {
        alpha0: a0,
        eta2,
        eta1,
        rms_residual: field(7)?.unwrap_or(0.0),
        absolute: a0 == 0.0,
    };
    Ok(Prediction {
        shift_khz: sidonor::stark::evaluate_fit(&fit, e),
        uncertainty_khz: propagate_field_uncertainty(&fit, e, delta_e),
        fit,
    })
}

pub fn read_table(path: Option<&Path>) -> Result<String> {
    match path {
        None => Ok(REFERENCE_TABLE.to_string()),
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
    }
}
