//! Subcommand implementations. Each validates its keys, runs the physics and
//! returns tables ready for output.

use m1sim::analytic::{
    budget_from_coupling, coherence_budget, dispersion, overlap_continuum, saddle_points,
    BudgetParams, V_FERMI,
};
use m1sim::dressing::{
    anchor_triple, dressed_tails, fredholm_design, match_double_dressing, offcritical_patterns,
    potential_table, radii_grid, rydberg_chain_params, DressingLayer, PotentialDesign, REF_C6,
    REF_OMEGA, REF_R0,
};
use m1sim::exec::Exec;
use m1sim::hilbert::{Boundary, HilbertSpace};
use m1sim::kinkdyn::{
    final_ground_state, kink_basis, overlap_from_energies, prepare_scan, propagate,
    real_to_complex, rydberg_quench, Detector, KinkConstraint, Method, PinningSpec, PrepTarget,
    RydbergVariant, Schedule, SweepProtocol,
};
use m1sim::operators::{
    build_hq, fit_observable_coeffs, observable_diagonal, ObservableKind, Staggering,
};
use m1sim::spectra::{
    cft_densities, diagonalize, ground_state_densities, kink_band, profile_of, sector_energies,
    Count,
};
use m1sim::Complex64;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ResultBundle, Table};

pub const COMMANDS: [&str; 11] = [
    "spectrum",
    "densities",
    "kink-profile",
    "quench",
    "saddle",
    "dispersion",
    "prepare",
    "rydberg-quench",
    "design-potential",
    "budget",
    "figures",
];

const COMMON: [&str; 3] = ["out", "precision", "exec"];

fn schema(command: &str) -> &'static [&'static str] {
    match command {
        "spectrum" => &[
            "l", "sites", "lambda", "offset", "boundary", "sectors", "levels",
        ],
        "densities" => &["l", "lambda", "offset", "amplitude"],
        "kink-profile" => &["l", "lambdas"],
        "quench" => &["l", "lambda", "init", "t_max", "dt", "method", "cn_dt"],
        "saddle" => &["l", "lambda", "x_min", "x_max", "points", "saddles"],
        "dispersion" => &["lambdas", "points", "l_exact"],
        "prepare" => &[
            "l",
            "lambdas",
            "durations",
            "target",
            "schedule",
            "step_scale",
            "dt",
            "mu",
            "mu0",
            "slope",
            "constraint",
            "penalty",
        ],
        "rydberg-quench" => &[
            "l", "lambda", "init", "omega", "delta", "ratio", "c6", "r0", "t_max", "dt", "variants",
        ],
        "design-potential" => &[
            "mode",
            "omega",
            "delta",
            "ratio",
            "c6",
            "r0",
            "delta2",
            "c6_2",
            "s",
            "rho_min",
            "rho_max",
            "radii",
            "fit_max",
            "rcond",
            "n_min",
            "n_max",
            "points",
            "lambda",
            "sites",
            "offset",
            "max_range",
        ],
        "budget" => &[
            "omega",
            "c6",
            "r0",
            "tau0",
            "kappa",
            "e_scft",
            "ratio_min",
            "ratio_max",
            "points",
            "prep",
        ],
        "figures" => &["fig"],
        _ => &[],
    }
}

pub fn validate(command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    if !COMMANDS.contains(&command) {
        return Err(CliError::Config(format!("unknown command '{command}'")));
    }
    let allowed: Vec<&str> = schema(command)
        .iter()
        .chain(COMMON.iter())
        .copied()
        .collect();
    cfg.check_keys(command, &allowed)
}

fn exec_of(cfg: &RunConfig) -> Result<Exec, CliError> {
    match cfg.raw("exec").unwrap_or("auto") {
        "auto" => Ok(Exec::default()),
        "parallel" => Ok(Exec::Parallel),
        "sequential" => Ok(Exec::Sequential),
        other => Err(CliError::Config(format!(
            "exec={other}: expected auto, parallel or sequential"
        ))),
    }
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    validate(command, cfg)?;
    let exec = exec_of(cfg)?;
    match command {
        "spectrum" => spectrum(cfg, exec),
        "densities" => densities(cfg),
        "kink-profile" => kink_profile(cfg),
        "quench" => quench(cfg),
        "saddle" => saddle(cfg, exec),
        "dispersion" => dispersion_cmd(cfg),
        "prepare" => prepare(cfg, exec),
        "rydberg-quench" => rydberg(cfg),
        "design-potential" => design_potential(cfg),
        "budget" => budget(cfg),
        "figures" => figures(cfg),
        _ => unreachable!("validated above"),
    }
}

fn grid(t_max: f64, dt: f64) -> Result<Vec<f64>, CliError> {
    if !(t_max > 0.0) || !(dt > 0.0) {
        return Err(CliError::Config("t_max and dt must be positive".into()));
    }
    let n = (t_max / dt).round() as usize;
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 || !(hi > lo) {
        return Err(CliError::Config(format!(
            "need at least two points on [{lo}, {hi}]"
        )));
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

fn choice<'a>(
    cfg: &'a RunConfig,
    key: &str,
    default: &'a str,
    allowed: &[&str],
) -> Result<&'a str, CliError> {
    let v = cfg.raw(key).unwrap_or(default);
    if allowed.contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "{key}={v}: expected one of {}",
            allowed.join(", ")
        )))
    }
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn spectrum(cfg: &RunConfig, exec: Exec) -> Result<ResultBundle, CliError> {
    let l: usize = cfg.parse("l", 4)?;
    let sites: usize = cfg.parse("sites", 3 * l + 1)?;
    let lambda: f64 = cfg.parse("lambda", 1.0)?;
    let offset: usize = cfg.parse("offset", 0)?;
    let boundary = match choice(cfg, "boundary", "open", &["open", "periodic"])? {
        "open" => Boundary::Open,
        _ => Boundary::Periodic,
    };
    let levels: Option<usize> = cfg.parse_opt("levels")?;
    let stagger = Staggering::new(sites, lambda, offset)?;
    let mut bundle = ResultBundle::default();
    let mut table = Table::new(
        "levels",
        &format!("H_Q levels, L={sites}, lambda={lambda}"),
        &[("n", "particles"), ("index", "1"), ("energy", "J")],
    );
    let sectors: Vec<(usize, Vec<f64>)> = match cfg.raw("sectors") {
        None => sector_energies(sites, boundary, &stagger, exec)?,
        Some(_) => {
            let wanted = cfg.list_f64("sectors", &[])?;
            let mut worst = 0.0f64;
            let mut out = Vec::new();
            for n in wanted {
                if n < 0.0 || n.fract() != 0.0 {
                    return Err(CliError::Config(format!(
                        "sector {n} is not a particle number"
                    )));
                }
                let space = HilbertSpace::enumerate(sites, n as usize, boundary, true)?;
                if space.dim() == 0 {
                    continue;
                }
                let h = build_hq(&space, &stagger)?;
                let count = match levels {
                    Some(k) if k < space.dim() => Count::Lowest(k),
                    _ => Count::All,
                };
                let spec = diagonalize(&h, count)?;
                worst = worst.max(spec.max_residual(&h));
                out.push((n as usize, spec.energies));
            }
            bundle.note("max_residual", worst);
            out
        }
    };
    for (n, energies) in &sectors {
        let keep = levels.unwrap_or(energies.len()).min(energies.len());
        for (k, e) in energies.iter().take(keep).enumerate() {
            table.push(vec![*n as f64, (k + 1) as f64, *e]);
        }
    }
    bundle.note("sites", sites);
    bundle.note(
        "sector_dims",
        sectors
            .iter()
            .map(|(n, e)| (n, e.len()))
            .collect::<Vec<_>>(),
    );
    bundle.table(table);
    Ok(bundle)
}

fn densities(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let l: usize = cfg.parse("l", 6)?;
    let lambda: f64 = cfg.parse("lambda", 1.0)?;
    let amplitude: f64 = cfg.parse("amplitude", 0.77)?;
    if cfg.parse::<usize>("offset", 1)? != 1 {
        return Err(CliError::Config(
            "ground-state densities use the 1λ1 pattern (offset=1)".into(),
        ));
    }
    let prof = ground_state_densities(l, lambda)?;
    let cft = cft_densities(3 * l, amplitude)?;
    let energy = prof.energy_densities.clone().unwrap_or_default();
    let mut t = Table::new(
        "densities",
        &format!("ground state of L={}, lambda={lambda}", 3 * l),
        &[("site", "1"), ("n", "1"), ("h", "J"), ("n_cft", "1")],
    );
    for i in 1..=3 * l {
        let c = if i >= cft.first_site {
            cft.site(i)
        } else {
            f64::NAN
        };
        t.push(vec![
            i as f64,
            prof.site(i),
            energy.get(i - 1).copied().unwrap_or(f64::NAN),
            c,
        ]);
    }
    let mut b = ResultBundle::default();
    b.note(
        "cft_deviation",
        max_of((2..=3 * l).map(|i| (prof.site(i) - cft.site(i)).abs())),
    );
    b.note("total_particles", prof.total());
    b.table(t);
    Ok(b)
}

fn lambda_tag(lambda: f64) -> String {
    format!("lambda{lambda}")
}

fn kink_profile(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let l: usize = cfg.parse("l", 3)?;
    let lambdas = cfg.list_f64("lambdas", &[0.0, 0.5, 1.0])?;
    let sites = 3 * l + 1;
    let mut b = ResultBundle::default();
    for &lam in &lambdas {
        let basis = kink_basis(l, lam)?;
        let st = Staggering::new(sites, lam, 0)?;
        let sk = basis
            .skinks
            .as_ref()
            .ok_or_else(|| CliError::Config("no skink sector for this l".into()))?;
        for (kind, space, states, target) in [
            ("kinks", &basis.space, &basis.kinks, PrepTarget::Kink(1)),
            ("skinks", &sk.space, &sk.states, PrepTarget::Skink(1)),
        ] {
            let mut profiles = Vec::new();
            for s in states.iter() {
                profiles.push(profile_of(space, &st, s)?);
            }
            let (pspace, prepared) = final_ground_state(l, lam, target)?;
            let pprof = profile_of(&pspace, &st, &prepared)?;
            let mut names: Vec<(String, String)> = vec![("site".into(), "1".into())];
            for j in 1..=states.len() {
                names.push((format!("n_{j}"), "1".into()));
                names.push((format!("h_{j}"), "J".into()));
            }
            names.push(("n_prepared_1".into(), "1".into()));
            let cols: Vec<(&str, &str)> = names
                .iter()
                .map(|(a, u)| (a.as_str(), u.as_str()))
                .collect();
            let mut t = Table::new(
                &format!("{kind}_{}", lambda_tag(lam)),
                &format!("localized {kind} densities, l={l}, lambda={lam}; n_prepared_1 is the pinned ground state"),
                &cols,
            );
            for i in 1..=sites {
                let mut row = vec![i as f64];
                for p in &profiles {
                    row.push(p.site(i));
                    row.push(p.energy_densities.as_ref().map_or(f64::NAN, |h| h[i - 1]));
                }
                row.push(pprof.site(i));
                t.push(row);
            }
            b.table(t);
        }
    }
    Ok(b)
}

fn quench(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let l: usize = cfg.parse("l", 4)?;
    let lambda: f64 = cfg.parse("lambda", 1.0)?;
    let init = choice(
        cfg,
        "init",
        "exact-kink",
        &[
            "exact-kink",
            "exact-skink",
            "prepared-kink",
            "prepared-skink",
        ],
    )?;
    let times = grid(cfg.parse("t_max", 30.0)?, cfg.parse("dt", 0.01)?)?;
    let method = match choice(cfg, "method", "eigen", &["eigen", "cn"])? {
        "eigen" => Method::Eigen,
        _ => Method::CrankNicolson {
            dt: cfg.parse_opt("cn_dt")?,
        },
    };
    let basis = kink_basis(l, lambda)?;
    let skink = init.ends_with("skink");
    let (space, reference, target) = if skink {
        let sk = basis
            .skinks
            .as_ref()
            .ok_or_else(|| CliError::Config("no skink sector for this l".into()))?;
        (sk.space.clone(), sk.states[0].clone(), sk.states[l].clone())
    } else {
        (
            basis.space.clone(),
            basis.kinks[0].clone(),
            basis.kinks[l].clone(),
        )
    };
    let start = if init.starts_with("prepared") {
        let want = if skink {
            PrepTarget::Skink(1)
        } else {
            PrepTarget::Kink(1)
        };
        final_ground_state(l, lambda, want)?.1
    } else {
        reference.clone()
    };
    let h = build_hq(&space, &Staggering::new(3 * l + 1, lambda, 0)?)?;
    let traj = propagate(&real_to_complex(&start), &h, &times, method)?;
    let o2: Vec<f64> = traj
        .overlaps(&target)
        .iter()
        .map(|z| z.norm_sqr())
        .collect();
    let band = overlap_from_energies(l, &basis.energies, &times);
    let d = dispersion(lambda)?;
    let n = (l + 2) as f64;
    let continuum_e: Vec<f64> = (1..=l + 1)
        .map(|k| d.energy(std::f64::consts::PI * k as f64 / n))
        .collect();
    let cont = overlap_from_energies(l, &continuum_e, &times);

    let kinds: &[ObservableKind] = if skink {
        &[ObservableKind::DnBar]
    } else {
        &[ObservableKind::Dn, ObservableKind::Dn3]
    };
    let mut observables = Vec::new();
    let mut b = ResultBundle::default();
    for &kind in kinds {
        let coeffs = fit_observable_coeffs(kind, &basis)?;
        b.note(&format!("coeffs_{}", kind.name()), coeffs);
        observables.push((
            kind.name(),
            traj.expect_diagonal(&observable_diagonal(kind, &space, coeffs)?),
        ));
    }
    let mut cols = vec![
        ("t", "1/J"),
        ("t_vf_over_l", "1"),
        ("o2", "1"),
        ("o2_band", "1"),
        ("o2_continuum", "1"),
    ];
    cols.extend(observables.iter().map(|(name, _)| (*name, "1")));
    let mut t = Table::new(
        "series",
        &format!("quench from {init}, l={l}, lambda={lambda}"),
        &cols,
    );
    for (i, &time) in times.iter().enumerate() {
        let mut row = vec![
            time,
            time * V_FERMI / l as f64,
            o2[i],
            band.overlap_sq[i],
            cont.overlap_sq[i],
        ];
        row.extend(observables.iter().map(|(_, v)| v[i]));
        t.push(row);
    }
    b.note(
        "initial_fidelity",
        m1sim::linalg::dot(&start, &reference).abs(),
    );
    b.note("norm_drift", traj.norm_drift());
    b.note(
        "max_o2_vs_band",
        max_of(o2.iter().zip(&band.overlap_sq).map(|(a, c)| (a - c).abs())),
    );
    b.note("band_energies", &basis.energies);
    b.table(t);
    Ok(b)
}

fn saddle(cfg: &RunConfig, exec: Exec) -> Result<ResultBundle, CliError> {
    let l: usize = cfg.parse("l", 101)?;
    let lambda: f64 = cfg.parse("lambda", 1.0)?;
    let saddles: usize = cfg.parse("saddles", 2)?;
    let xs = linspace(
        cfg.parse("x_min", 0.05)?,
        cfg.parse("x_max", 5.0)?,
        cfg.parse("points", 2000)?,
    )?;
    if xs[0] <= 0.0 {
        return Err(CliError::Config("x_min must be positive".into()));
    }
    let lf = l as f64;
    let times: Vec<f64> = xs.iter().map(|x| x * lf / V_FERMI).collect();
    let cont = overlap_continuum(l, lambda, &times)?;
    let parts = exec.try_map(&times, |&t| -> Result<[Complex64; 3], m1sim::Error> {
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for s in saddle_points(l, lambda, t, saddles)? {
            acc[0] += s.amplitude;
            match s.index {
                1 => acc[1] += s.amplitude,
                2 => acc[2] += s.amplitude,
                _ => {}
            }
        }
        Ok(acc)
    })?;
    let mut t = Table::new(
        "series",
        &format!("continuum overlap and saddle-point estimate, l={l}, lambda={lambda}, up to s={saddles}"),
        &[("t", "1/J"), ("t_vf_over_l", "1"), ("o2_continuum", "1"), ("o2_saddle", "1"), ("o2_s1", "1"), ("o2_s2", "1")],
    );
    for i in 0..times.len() {
        let p = parts[i];
        t.push(vec![
            times[i],
            xs[i],
            cont[i].norm_sqr(),
            p[0].norm_sqr(),
            p[1].norm_sqr(),
            p[2].norm_sqr(),
        ]);
    }
    let num: f64 = parts
        .iter()
        .zip(&cont)
        .map(|(p, c)| (p[0].norm_sqr() - c.norm_sqr()).powi(2))
        .sum();
    let den: f64 = cont.iter().map(|c| c.norm_sqr().powi(2)).sum();
    let mut b = ResultBundle::default();
    b.note("relative_l2", (num / den).sqrt());
    b.table(t);
    Ok(b)
}

fn dispersion_cmd(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let lambdas = cfg.list_f64("lambdas", &[0.1, 0.5, 1.0])?;
    let points: usize = cfg.parse("points", 201)?;
    let l_exact: usize = cfg.parse("l_exact", 4)?;
    let ks = linspace(0.0, std::f64::consts::PI, points)?;
    let mut curves = Table::new(
        "curves",
        "continuum one-kink dispersion",
        &[
            ("lambda", "1"),
            ("k", "1"),
            ("energy", "J"),
            ("velocity", "J"),
        ],
    );
    let mut peaks = Table::new(
        "peaks",
        "gap and peak group velocity",
        &[
            ("lambda", "1"),
            ("gap", "J"),
            ("k_peak", "1"),
            ("v_max", "J"),
        ],
    );
    let mut exact = Table::new(
        "exact",
        &format!("one-kink band of l={l_exact} against the continuum curve at k=pi*k_index/(l+2)"),
        &[
            ("lambda", "1"),
            ("k_index", "1"),
            ("k", "1"),
            ("energy_exact", "J"),
            ("energy_continuum", "J"),
        ],
    );
    let mut worst = 0.0f64;
    for &lam in &lambdas {
        let d = dispersion(lam)?;
        for &k in &ks {
            curves.push(vec![lam, k, d.energy(k), d.velocity(k)]);
        }
        let (kp, vp) = d.velocity_peak();
        peaks.push(vec![lam, d.gap(), kp, vp]);
        if l_exact > 0 {
            let band = kink_band(l_exact, lam)?;
            for (i, e) in band.energies.iter().enumerate() {
                let k = std::f64::consts::PI * (i + 1) as f64 / (l_exact + 2) as f64;
                worst = worst.max((e - d.energy(k)).abs());
                exact.push(vec![lam, (i + 1) as f64, k, *e, d.energy(k)]);
            }
        }
    }
    let mut b = ResultBundle::default();
    b.note("max_exact_vs_continuum", worst);
    b.table(curves);
    b.table(peaks);
    if l_exact > 0 {
        b.table(exact);
    }
    Ok(b)
}

fn prepare(cfg: &RunConfig, exec: Exec) -> Result<ResultBundle, CliError> {
    let l: usize = cfg.parse("l", 4)?;
    let lambdas = cfg.list_f64("lambdas", &[0.0, 0.25, 0.5, 0.75, 1.0])?;
    let durations = cfg.list_f64("durations", &[25.0, 50.0, 100.0, 200.0])?;
    let target = match choice(cfg, "target", "kink", &["ground", "kink", "skink"])? {
        "ground" => PrepTarget::GroundState,
        "kink" => PrepTarget::Kink(1),
        _ => PrepTarget::Skink(1),
    };
    let schedule = match choice(cfg, "schedule", "cosine", &["cosine", "quintic"])? {
        "cosine" => Schedule::Cosine,
        _ => Schedule::Quintic,
    };
    let defaults = PinningSpec::default();
    let pinning = PinningSpec {
        mu: cfg.parse("mu", defaults.mu)?,
        mu0: cfg.parse("mu0", defaults.mu0)?,
        slope: cfg.parse("slope", defaults.slope)?,
    };
    let constraint = match choice(cfg, "constraint", "projection", &["projection", "penalty"])? {
        "projection" => KinkConstraint::Projection,
        _ => KinkConstraint::Penalty(cfg.parse("penalty", 100.0)?),
    };
    let step_scale: f64 = cfg.parse("step_scale", 0.01)?;
    let dt: Option<f64> = cfg.parse_opt("dt")?;
    let mut jobs = Vec::new();
    for &lam in &lambdas {
        for &dur in &durations {
            let mut p = SweepProtocol::new(l, lam, dur);
            p.schedule = schedule;
            p.pinning = pinning;
            p.kink_constraint = constraint;
            p.step_scale = step_scale;
            p.dt = dt;
            jobs.push((p, target));
        }
    }
    let preps = prepare_scan(&jobs, exec)?;
    let mut t = Table::new(
        "fidelity",
        &format!("adiabatic preparation, target {target:?}, l={l}"),
        &[
            ("lambda", "1"),
            ("duration", "1/J"),
            ("fidelity", "1"),
            ("final_ground_fidelity", "1"),
            ("min_gap", "J"),
            ("steps", "1"),
        ],
    );
    let mut b = ResultBundle::default();
    for ((p, _), prep) in jobs.iter().zip(&preps) {
        t.push(vec![
            p.lambda,
            p.duration,
            prep.fidelity,
            prep.final_ground_fidelity,
            prep.min_gap,
            prep.steps as f64,
        ]);
        if let Some(w) = &prep.warning {
            b.warnings
                .push(format!("lambda={} T={}: {w}", p.lambda, p.duration));
        }
    }
    b.table(t);
    Ok(b)
}

fn primary_layer(cfg: &RunConfig) -> Result<DressingLayer, CliError> {
    let omega = cfg.angular("omega", REF_OMEGA)?;
    let delta = match cfg.raw("delta") {
        Some(_) => cfg.angular("delta", 0.0)?,
        None => cfg.parse::<f64>("ratio", 10.0)? * omega,
    };
    Ok(DressingLayer::new(omega, delta, cfg.scaled("c6", REF_C6)?))
}

fn rydberg(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let l: usize = cfg.parse("l", 3)?;
    let lambda: f64 = cfg.parse("lambda", 1.0)?;
    let init = choice(cfg, "init", "kink", &["kink", "skink"])?;
    let r0: f64 = cfg.parse("r0", REF_R0)?;
    let layer = primary_layer(cfg)?;
    let times = grid(cfg.parse("t_max", 30.0)?, cfg.parse("dt", 0.05)?)?;
    let variants = match cfg.raw("variants") {
        None => vec![
            RydbergVariant::Full,
            RydbergVariant::TruncatedNnn,
            RydbergVariant::HqReference,
        ],
        Some(s) => s
            .split(',')
            .map(|v| match v.trim() {
                "full" => Ok(RydbergVariant::Full),
                "truncated_nnn" => Ok(RydbergVariant::TruncatedNnn),
                "hq_reference" => Ok(RydbergVariant::HqReference),
                other => Err(CliError::Config(format!("unknown variant '{other}'"))),
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let (target, kind) = if init == "kink" {
        (PrepTarget::Kink(1), ObservableKind::Dn)
    } else {
        (PrepTarget::Skink(1), ObservableKind::DnBar)
    };
    let params = rydberg_chain_params(&layer, r0, 3 * l + 1)?;
    let (space, state) = final_ground_state(l, lambda, target)?;
    let coeffs = fit_observable_coeffs(kind, &kink_basis(l, lambda)?)?;
    let runs = rydberg_quench(
        &params,
        &space,
        &state,
        &times,
        &variants,
        Detector { kind, coeffs },
    )?;

    let mut names: Vec<String> = Vec::new();
    for v in &variants {
        for obs in ["dn", "rydberg", "ground_pairs"] {
            names.push(format!("{obs}_{}", v.name()));
        }
    }
    let mut cols: Vec<(&str, &str)> = vec![("t", "1/J"), ("t_vf_over_l", "1")];
    cols.extend(names.iter().map(|n| (n.as_str(), "1")));
    let mut t = Table::new(
        "series",
        &format!(
            "Rydberg quench from the prepared {init}, l={l}, Omega/Delta={}",
            layer.omega / layer.delta
        ),
        &cols,
    );
    for (i, &time) in times.iter().enumerate() {
        let mut row = vec![time, time * V_FERMI / l as f64];
        for v in &variants {
            let s = &runs[v];
            for obs in ["dn", "rydberg", "ground_pairs"] {
                row.push(s.observables.get(obs).map_or(f64::NAN, |x| x[i]));
            }
        }
        t.push(row);
    }
    let mut b = ResultBundle::default();
    b.note("hopping_j", params.hopping);
    b.note("detector_coeffs", coeffs);
    for v in &variants {
        b.note(&format!("norm_drift_{}", v.name()), runs[v].norm_drift);
    }
    b.table(t);
    Ok(b)
}

fn design_potential(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let mode = choice(
        cfg,
        "mode",
        "double",
        &["single", "double", "fredholm", "patterns"],
    )?;
    let r0: f64 = cfg.parse("r0", REF_R0)?;
    let n_min: f64 = cfg.parse("n_min", 0.5)?;
    let n_max: f64 = cfg.parse("n_max", 6.0)?;
    let points: usize = cfg.parse("points", 551)?;
    let mut b = ResultBundle::default();
    match mode {
        "single" | "double" => {
            let primary = primary_layer(cfg)?;
            let mut layers = vec![primary.clone()];
            if mode == "double" {
                let second = match_double_dressing(
                    &primary,
                    cfg.angular("delta2", -500e6)?,
                    cfg.scaled("c6_2", -6005e9)?,
                )?;
                b.note("omega_secondary", second.omega);
                layers.push(second);
            }
            let rows = potential_table(&layers, None, r0, n_min, n_max, points)?;
            let mut cols = vec![("n", "r0")];
            let names: Vec<String> = (1..=layers.len()).map(|i| format!("w_layer{i}")).collect();
            cols.extend(names.iter().map(|s| (s.as_str(), "Hz")));
            cols.push(("w_total", "Hz"));
            cols.push(("w_target", "Hz"));
            let mut t = Table::new("potential", &format!("{mode} dressing potential"), &cols);
            rows.into_iter().for_each(|r| t.push(r));
            let (w2, blockade, suppression) = anchor_triple(&layers, r0)?;
            b.note("w_2r0", w2);
            b.note("w_r0_over_w_2r0", blockade);
            b.note("w_2r0_over_w_3r0", suppression);
            b.table(t);
        }
        "fredholm" => {
            let s: f64 = cfg.parse("s", 1e3)?;
            let rho = radii_grid(
                cfg.parse("rho_min", 0.01)?,
                cfg.parse("rho_max", 2.0)?,
                cfg.parse("radii", 8)?,
            );
            let fit: Vec<f64> = (1..=cfg.parse::<usize>("fit_max", 5)?)
                .map(|n| n as f64)
                .collect();
            let design = fredholm_design(s, r0, &rho, &fit, cfg.parse("rcond", 1e-12)?)?;
            fredholm_tables(&mut b, &design, r0, n_min, n_max, points)?;
        }
        _ => {
            let lambda: f64 = cfg.parse("lambda", 0.5)?;
            let sites: usize = cfg.parse("sites", 10)?;
            let offset: usize = cfg.parse("offset", 0)?;
            let p = offcritical_patterns(lambda, sites, offset)?;
            let mut t = Table::new(
                "patterns",
                &format!("off-critical couplings, L={sites}, lambda={lambda}"),
                &[
                    ("site", "1"),
                    ("hopping", "J"),
                    ("nnn", "J"),
                    ("mu", "J"),
                    ("rabi", "Omega"),
                ],
            );
            let at = |v: &Vec<f64>, i: usize| v.get(i).copied().unwrap_or(f64::NAN);
            for i in 0..sites {
                t.push(vec![
                    (i + 1) as f64,
                    at(&p.hopping, i),
                    at(&p.nnn, i),
                    at(&p.mu, i),
                    at(&p.rabi, i),
                ]);
            }
            b.table(t);
            if lambda > 0.0 {
                let layer = primary_layer(cfg)?;
                let tails = dressed_tails(
                    &layer,
                    r0,
                    lambda,
                    sites,
                    offset,
                    cfg.parse("max_range", 4)?,
                )?;
                let mut tt = Table::new(
                    "tails",
                    "dressed couplings of pairs (i, i+range) beyond next-nearest neighbours",
                    &[("range", "sites"), ("site", "1"), ("w", "J")],
                );
                for (row, vals) in tails.iter().enumerate() {
                    for (i, w) in vals.iter().enumerate() {
                        tt.push(vec![(row + 2) as f64, (i + 1) as f64, *w]);
                    }
                }
                b.table(tt);
            }
        }
    }
    Ok(b)
}

fn fredholm_tables(
    b: &mut ResultBundle,
    design: &PotentialDesign,
    r0: f64,
    n_min: f64,
    n_max: f64,
    points: usize,
) -> Result<(), CliError> {
    let mut t = Table::new(
        "potential",
        &format!("Fredholm design, suppression {:?}", design.suppression),
        &[("n", "r0"), ("w_total", "1"), ("w_target", "1")],
    );
    potential_table(&[], Some(design), r0, n_min, n_max, points)?
        .into_iter()
        .for_each(|r| t.push(r));
    let mut c = Table::new(
        "components",
        "flat-top components",
        &[("rho", "um"), ("amplitude", "1")],
    );
    for comp in &design.components {
        c.push(vec![comp.rho, comp.amplitude]);
    }
    b.note("fit_residual", design.fit_residual());
    b.note("rank", design.rank);
    b.note("singular_values", &design.singular_values);
    b.note("w_2r0_over_w_25r0", design.tail_ratio(25.0));
    b.table(t);
    b.table(c);
    Ok(())
}

fn budget(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let reference = BudgetParams::reference();
    let omega = cfg.angular("omega", reference.omega)?;
    let taus = cfg.seconds_list("tau0", &[8.6e-3, 2.8e-3, 0.42e-3])?;
    let ratios = linspace(
        cfg.parse("ratio_min", 2.0)?,
        cfg.parse("ratio_max", 40.0)?,
        cfg.parse("points", 77)?,
    )?;
    let prep: bool = cfg.parse("prep", true)?;
    let base = BudgetParams {
        omega,
        c6: cfg.scaled("c6", reference.c6)?,
        r0: cfg.parse("r0", reference.r0)?,
        kappa: cfg.parse("kappa", reference.kappa)?,
        e_scft: cfg.parse("e_scft", reference.e_scft)?,
        ..reference
    };
    let names: Vec<String> = taus
        .iter()
        .map(|t| {
            let ms = format!("{:.6}", t * 1e3);
            format!(
                "l_max_tau{}ms",
                ms.trim_end_matches('0').trim_end_matches('.')
            )
        })
        .collect();
    let mut cols = vec![("delta_over_omega", "1")];
    cols.extend(names.iter().map(|n| (n.as_str(), "sites")));
    let mut t = Table::new("lmax", "achievable chain length against detuning", &cols);
    let mut dual = 0.0f64;
    for &r in &ratios {
        let mut row = vec![r];
        for &tau0 in &taus {
            let p = BudgetParams {
                delta: r * omega,
                tau0,
                ..base
            };
            row.push(coherence_budget(&p, prep)?);
            let a = coherence_budget(&p, false)?;
            dual = dual.max(((a - budget_from_coupling(&p)?) / a).abs());
        }
        t.push(row);
    }
    let mut b = ResultBundle::default();
    b.note("evolution_route_mismatch", dual);
    b.table(t);
    Ok(b)
}

/// Preset parameter sets, one per figure panel.
pub fn figure_presets(fig: &str) -> Option<Vec<(&'static str, &'static str, Vec<&'static str>)>> {
    Some(match fig {
        "1b" => vec![("densities", "densities", vec!["l=6", "lambda=1"])],
        "1c" => vec![("profiles", "kink-profile", vec!["l=3", "lambdas=0,0.5,1"])],
        "2a" => vec![
            (
                "levels",
                "spectrum",
                vec!["l=4", "lambda=1", "sectors=4,5", "levels=12"],
            ),
            (
                "crossings",
                "spectrum",
                vec!["l=4", "lambda=0", "sectors=4,5", "levels=12"],
            ),
        ],
        "2b" => vec![(
            "dispersion",
            "dispersion",
            vec!["lambdas=0.1,0.5,1", "l_exact=4"],
        )],
        "3a" => vec![
            (
                "exact",
                "quench",
                vec!["l=4", "lambda=1", "init=exact-kink"],
            ),
            (
                "prepared",
                "quench",
                vec!["l=4", "lambda=1", "init=prepared-kink"],
            ),
        ],
        "3b" => vec![("saddle", "saddle", vec!["l=101", "lambda=1", "saddles=2"])],
        "3c" => vec![
            ("kink", "rydberg-quench", vec!["l=3", "init=kink"]),
            ("skink", "rydberg-quench", vec!["l=3", "init=skink"]),
        ],
        "S1" => vec![("profiles", "kink-profile", vec!["l=3", "lambdas=0,1"])],
        "S2" => vec![
            ("kink", "quench", vec!["l=3", "lambda=1", "init=exact-kink"]),
            (
                "skink",
                "quench",
                vec!["l=3", "lambda=1", "init=exact-skink"],
            ),
        ],
        "S3" => vec![
            (
                "ground",
                "prepare",
                vec!["l=4", "target=ground", "step_scale=0.1"],
            ),
            (
                "kink",
                "prepare",
                vec!["l=4", "target=kink", "step_scale=0.1"],
            ),
        ],
        "S4" => vec![(
            "patterns",
            "design-potential",
            vec!["mode=patterns", "lambda=0.5", "sites=10"],
        )],
        "S5" => vec![
            (
                "74d",
                "design-potential",
                vec!["mode=double", "c6_2=-6005GHz"],
            ),
            (
                "84d",
                "design-potential",
                vec!["mode=double", "c6_2=-24200GHz"],
            ),
        ],
        "S6" => vec![
            (
                "s1e3",
                "design-potential",
                vec!["mode=fredholm", "s=1e3", "fit_max=5", "n_max=26"],
            ),
            (
                "s1e5",
                "design-potential",
                vec!["mode=fredholm", "s=1e5", "fit_max=6", "n_max=26"],
            ),
        ],
        "S7" => vec![("budget", "budget", vec![])],
        _ => return None,
    })
}

pub const FIGURES: [&str; 14] = [
    "1b", "1c", "2a", "2b", "3a", "3b", "3c", "S1", "S2", "S3", "S4", "S5", "S6", "S7",
];

fn coefficient_scaling() -> Result<ResultBundle, CliError> {
    let mut t = Table::new(
        "coefficients",
        "detector coefficients at lambda=1 against l",
        &[
            ("l", "1"),
            ("alpha_dn", "1"),
            ("beta_dn", "1"),
            ("alpha_dn3", "1"),
            ("beta_dn3", "1"),
            ("alpha_dnbar", "1"),
            ("beta_dnbar", "1"),
        ],
    );
    for l in 2..=6 {
        let basis = kink_basis(l, 1.0)?;
        let mut row = vec![l as f64];
        for kind in [
            ObservableKind::Dn,
            ObservableKind::Dn3,
            ObservableKind::DnBar,
        ] {
            let (a, c) = fit_observable_coeffs(kind, &basis)?;
            row.extend([a, c]);
        }
        t.push(row);
    }
    let mut b = ResultBundle::default();
    b.table(t);
    Ok(b)
}

fn figures(cfg: &RunConfig) -> Result<ResultBundle, CliError> {
    let wanted = cfg
        .raw("fig")
        .ok_or_else(|| CliError::Config("figures needs fig=<id> or fig=all".into()))?;
    let ids: Vec<String> = if wanted == "all" {
        FIGURES.iter().map(|s| s.to_string()).collect()
    } else {
        wanted.split(',').map(|s| s.trim().to_string()).collect()
    };
    let mut out = ResultBundle::default();
    for id in &ids {
        let key = FIGURES
            .iter()
            .find(|f| f.eq_ignore_ascii_case(id))
            .ok_or_else(|| {
                CliError::Config(format!(
                    "unknown figure '{id}'; known: {}",
                    FIGURES.join(", ")
                ))
            })?;
        let prefix = format!("fig{}", key.to_lowercase());
        for (panel, command, args) in figure_presets(key).expect("listed figure") {
            let mut sub = RunConfig::default();
            if let Some(e) = cfg.raw("exec") {
                sub.set("exec", e);
            }
            sub.apply_overrides(&args.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
            let mut bundle = run(command, &sub)?;
            bundle.note("command", command);
            bundle.note("config", sub.values());
            out.merge(&format!("{prefix}_{panel}"), bundle);
        }
        if *key == "S2" {
            out.merge(&format!("{prefix}_scaling"), coefficient_scaling()?);
        }
    }
    Ok(out)
}
