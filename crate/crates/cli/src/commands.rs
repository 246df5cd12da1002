use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ftl_core::ftl::{
    default_dt, periodicity_check, riemann_initial, simulate, CarEnsemble, SimOptions,
};
use ftl_core::io;
use ftl_core::model::{CaseReport, FluxModel, RoadCondition, SpeedLimit, Verdict};
use ftl_core::numeric::linspace;
use ftl_core::profile::max_periodic_residual;
use ftl_core::profile::{
    assess_profile, build_family, build_initial_data, generate_positions, interleaving_violation,
    invariant_region_violation, scan_anchors, solve_q_backward, solve_w_profile,
    transversality_report, Assessment, InitialKind, Profile, Side, SolverOptions, ACCEPT_TOL,
    RESIDUAL_SAMPLES,
};
use ftl_core::viscous::{
    default_span, pde_solve, stationary_profile, viscous_existence, PdeOptions, PdeState,
};

use crate::{
    output_path, parse_list, plot, steps_per_length, CliError, Command, InitialChoice, Switch,
};

pub(crate) fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Classify(a) => classify(a, out),
        Command::ProfileW(a) => profile_w(a, out),
        Command::ProfileQ(a) => profile_q(a, out),
        Command::Family(a) => family(a, out),
        Command::Ftl(a) => ftl(a, out),
        Command::ViscousProfile(a) => viscous_profile(a, out),
        Command::ViscousPde(a) => viscous_pde(a, out),
        Command::Diagnostics(a) => diagnostics(a, out),
    }
}

fn kv(out: &mut dyn Write, key: &str, value: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{key}={value}")?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = output_path(dir, name)?;
    let f = File::create(&path)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_profile_file(dir: &Path, name: &str, p: &Profile) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    io::write_profile(&mut w, p)?;
    w.flush()?;
    Ok(())
}

/// `name.csv`, or `name_k.csv` when there are several runs.
fn numbered(name: &str, k: usize, n: usize) -> String {
    if n == 1 {
        format!("{name}.csv")
    } else {
        format!("{name}_{k:02}.csv")
    }
}

fn setup(common: &crate::CommonArgs) -> Result<(FluxModel, RoadCondition), CliError> {
    common.check()?;
    Ok((common.model(), common.road()?))
}

const FLUX_SAMPLES: usize = 400;

fn classify(a: &crate::ClassifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, road) = setup(&a.common)?;
    let report = a.case.resolve(&model, &road)?;
    let mut w = create(&a.common.out, "flux.csv")?;
    io::write_flux(&mut w, &model, &road, FLUX_SAMPLES)?;
    w.flush()?;
    write_text(
        &a.common.out,
        "plot.gp",
        &plot::flux(
            report.to_string().lines().next().unwrap_or(""),
            report.fbar,
            report.rho_minus,
            report.rho_plus,
        ),
    )?;
    write!(out, "{report}")?;
    for (k, v) in report.to_key_values() {
        kv(out, &k, v)?;
    }
    Ok(())
}

fn profile_w(a: &crate::ProfileWArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, _) = setup(&a.common)?;
    let ell = a.common.ell;
    let speed = a.v.unwrap_or(a.common.v_plus);
    let mut opts = SolverOptions::default();
    if let Some(h) = a.h {
        opts.steps_per_length = steps_per_length(h, ell)?;
    }
    let w = solve_w_profile(&model, speed, a.fbar, ell, &opts)?;
    let (res, _) = max_periodic_residual(&w, &model, RESIDUAL_SAMPLES)?;
    write_profile_file(&a.common.out, "w.csv", &w)?;
    write_text(
        &a.common.out,
        "plot.gp",
        &plot::curves("W", "Q", &[("w.csv".into(), "W".into())]),
    )?;
    kv(out, "w_at_zero", format!("{:.17e}", w.eval(0.0)))?;
    kv(out, "left_limit", w.asymptote(Side::Left)?.value)?;
    kv(out, "right_limit", w.asymptote(Side::Right)?.value)?;
    kv(out, "monotone", w.is_monotone(1e-10))?;
    kv(out, "max_periodic_residual", res)?;
    kv(out, "nodes", w.xs().len())?;
    Ok(())
}

fn describe(a: &Assessment) -> &'static str {
    match a {
        Assessment::Accepted { .. } => "accepted",
        Assessment::BlowUp { .. } => "blow-up",
        Assessment::ResidualViolation { .. } => "residual-violation",
        Assessment::BoundaryMismatch { .. } => "boundary-mismatch",
        Assessment::Failed(_) => "failed",
    }
}

/// Anchor scan for cases without profiles: exit 3 when every anchor breaks down.
fn certify_nonexistence(
    model: &FluxModel,
    road: &RoadCondition,
    report: &CaseReport,
    ell: f64,
    x_min: f64,
    opts: &SolverOptions,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let outcomes = scan_anchors(model, road, report, ell, x_min, opts);
    let mut counts = std::collections::BTreeMap::new();
    for o in &outcomes {
        let d = describe(&o.assessment);
        *counts.entry(d).or_insert(0usize) += 1;
        match &o.assessment {
            Assessment::BlowUp { x, q } => {
                writeln!(out, "anchor q0={:.6} {d} at x={x:.6} (Q={q:.6})", o.q0)?
            }
            Assessment::ResidualViolation { residual } => {
                writeln!(out, "anchor q0={:.6} {d} residual={residual:.3e}", o.q0)?
            }
            other => writeln!(out, "anchor q0={:.6} {d} {other:?}", o.q0)?,
        }
    }
    if let Some(o) = outcomes.iter().find(|o| o.assessment.is_accepted()) {
        return Err(CliError::Failure(format!(
            "case {} admits no profile, yet anchor q0 = {} was accepted",
            report.label, o.q0
        )));
    }
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{v} {k}")).collect();
    Err(CliError::Nonexistence(format!(
        "case {}: no stationary profile exists; all {} anchors break down ({})",
        report.label,
        outcomes.len(),
        summary.join(", ")
    )))
}

/// Solves the profile through `q0` with the chosen initial data.
fn solve_member(
    model: &FluxModel,
    road: &RoadCondition,
    report: &CaseReport,
    q0: f64,
    initial: InitialChoice,
    ell: f64,
    x_min: f64,
    opts: &SolverOptions,
) -> Result<
    (
        InitialKind,
        Result<Profile, ftl_core::profile::ProfileError>,
    ),
    CliError,
> {
    let kind = match initial {
        InitialChoice::Constant => InitialKind::Constant,
        InitialChoice::Shifted => InitialKind::ShiftedW,
        InitialChoice::Auto if (q0 - report.rho_plus).abs() <= 1e-12 => InitialKind::Constant,
        InitialChoice::Auto => InitialKind::ShiftedW,
    };
    let w = match kind {
        InitialKind::ShiftedW => Some(solve_w_profile(model, road.v_plus, report.fbar, ell, opts)?),
        InitialKind::Constant => None,
    };
    let init = build_initial_data(kind, w.as_ref(), q0, model, road, ell, opts)?;
    Ok((kind, solve_q_backward(&init, model, road, ell, x_min, opts)))
}

fn report_assessment(a: &Assessment, out: &mut dyn Write) -> Result<(), CliError> {
    kv(out, "assessment", describe(a))?;
    match a {
        Assessment::Accepted {
            residual,
            left,
            right,
        } => {
            kv(out, "max_periodic_residual", residual)?;
            kv(out, "left_limit", left)?;
            kv(out, "right_limit", right)?;
        }
        Assessment::BlowUp { x, q } => {
            kv(out, "blowup_x", x)?;
            kv(out, "blowup_q", q)?;
        }
        Assessment::ResidualViolation { residual } => kv(out, "max_periodic_residual", residual)?,
        Assessment::BoundaryMismatch {
            side,
            found,
            expected,
        } => {
            kv(out, "mismatch_side", side)?;
            kv(out, "mismatch_found", found)?;
            kv(out, "mismatch_expected", expected)?;
        }
        Assessment::Failed(e) => kv(out, "failure", e)?,
    }
    Ok(())
}

fn profile_q(a: &crate::ProfileQArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, road) = setup(&a.common)?;
    let ell = a.common.ell;
    let report = a.case.resolve(&model, &road)?;
    let opts = a.solver.options(ell)?;
    let x_min = a.solver.x_min(ell)?;
    kv(out, "case", report.label)?;
    kv(out, "verdict", report.verdict)?;
    if report.verdict == Verdict::None {
        return certify_nonexistence(&model, &road, &report, ell, x_min, &opts, out);
    }
    let q0 = a.q0.unwrap_or(report.rho_plus);
    let (kind, result) = solve_member(&model, &road, &report, q0, a.initial, ell, x_min, &opts)?;
    kv(out, "q0", q0)?;
    kv(out, "initial", format!("{kind:?}"))?;
    let assessment = assess_profile(
        &result,
        &model,
        report.rho_minus,
        report.rho_plus,
        ACCEPT_TOL,
    );
    report_assessment(&assessment, out)?;
    let profile = match result {
        Ok(p) => p.with_case_label(report.label),
        Err(e) => {
            return Err(CliError::Nonexistence(format!(
                "case {} with Q(0) = {q0}: {e}",
                report.label
            )))
        }
    };
    write_profile_file(&a.common.out, "q.csv", &profile)?;
    write_text(
        &a.common.out,
        "plot.gp",
        &plot::curves(
            &format!("case {}", report.label),
            "Q",
            &[("q.csv".into(), format!("Q(0) = {q0}"))],
        ),
    )?;
    kv(out, "monotone", profile.is_monotone(1e-10))?;
    if let Some(y) = profile.crossing() {
        kv(out, "crossing", y)?;
    }
    if let Ok(t) = transversality_report(&profile, &model, opts.slope_cap) {
        kv(out, "transversal", t.passes())?;
    }
    if !assessment.is_accepted() {
        return Err(CliError::Nonexistence(format!(
            "case {} with Q(0) = {q0}: solution is not a profile ({})",
            report.label,
            describe(&assessment)
        )));
    }
    Ok(())
}

/// `lo:hi:n` or a comma list.
fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("bad grid `{s}`")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("bad grid `{s}`")))?;
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("bad grid `{s}`")))?;
            if n == 0 || !(hi >= lo) {
                return Err(CliError::Invalid(format!("bad grid `{s}`")));
            }
            Ok(linspace(lo, hi, n))
        }
        [_] => parse_list(s, "q0-grid"),
        _ => Err(CliError::Invalid(format!("bad grid `{s}`"))),
    }
}

fn family(a: &crate::FamilyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, road) = setup(&a.common)?;
    let ell = a.common.ell;
    let report = a.case.resolve(&model, &road)?;
    let opts = a.solver.options(ell)?;
    let x_min = a.solver.x_min(ell)?;
    let Some(range) = report.q0_range else {
        return certify_nonexistence(&model, &road, &report, ell, x_min, &opts, out);
    };
    let grid = match &a.q0_grid {
        Some(s) => parse_grid(s)?,
        None if range.lo == range.hi => vec![range.hi],
        None => linspace(range.lo + 0.1 * (range.hi - range.lo), range.hi, 8),
    };
    if let Some(q) = grid.iter().find(|&&q| !range.contains(q)) {
        return Err(CliError::Invalid(format!(
            "Q(0) = {q} outside the admissible range {range} of case {}",
            report.label
        )));
    }
    let fam = build_family(&model, &road, ell, report.fbar, &grid, x_min, &opts)?;
    let mut entries = Vec::new();
    let mut curves = Vec::new();
    for (k, (q0, m)) in fam.q0s().iter().zip(fam.members()).enumerate() {
        let name = format!("member_{k:02}.csv");
        write_profile_file(&a.common.out, &name, m)?;
        let left = m.asymptote(Side::Left).map(|s| s.value).unwrap_or(f64::NAN);
        writeln!(
            out,
            "member {k}: q0={q0:.6} left_limit={left:.6} monotone={}",
            m.is_monotone(1e-10)
        )?;
        curves.push((name.clone(), format!("Q(0) = {q0:.4}")));
        entries.push((*q0, name));
    }
    let mut w = create(&a.common.out, "index.csv")?;
    io::write_family_index(&mut w, &entries)?;
    w.flush()?;
    write_text(
        &a.common.out,
        "plot.gp",
        &plot::curves(&format!("case {} profiles", report.label), "Q", &curves),
    )?;
    let (lo, hi) = fam.common_span();
    kv(out, "members", fam.len())?;
    kv(out, "min_gap_window", format!("[{lo}, {hi}]"))?;
    kv(out, "min_gap", fam.min_gap(lo, hi, opts.step(ell)))?;
    Ok(())
}

/// Riemann states from `--riemann` or the case.
fn riemann_states(
    riemann: &Option<String>,
    case: &crate::CaseArgs,
    model: &FluxModel,
    road: &RoadCondition,
) -> Result<(f64, f64), CliError> {
    match riemann {
        Some(s) => match parse_list(s, "riemann")?.as_slice() {
            [l, r] => Ok((*l, *r)),
            _ => Err(CliError::Invalid(format!(
                "--riemann takes rhoL,rhoR, got `{s}`"
            ))),
        },
        None => {
            let r = case.resolve(model, road)?;
            Ok((r.rho_minus, r.rho_plus))
        }
    }
}

fn ftl(a: &crate::FtlArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, road) = setup(&a.common)?;
    let ell = a.common.ell;
    let (rho_l, rho_r) = riemann_states(&a.riemann, &a.case, &model, &road)?;
    let offsets = parse_list(&a.x0_spacings, "x0-spacings")?;
    let opts = SimOptions {
        event_resolved: a.events == Switch::On,
        record_every: a.record_every,
        ..SimOptions::default()
    };
    let mut files = Vec::new();
    for (k, &frac) in offsets.iter().enumerate() {
        let ens = riemann_initial(rho_l, rho_r, ell, frac * ell / rho_l, a.n_left, a.n_right)?;
        let dt = match a.dt {
            Some(dt) => dt,
            None => default_dt(&ens, &model, &road, 0.1, a.dt_cap)?,
        };
        let traj = simulate(&ens, &model, &road, a.t_end, dt, &opts)?;
        let tname = numbered("trajectory", k, offsets.len());
        let ename = numbered("events", k, offsets.len());
        let mut w = create(&a.common.out, &tname)?;
        io::write_trajectory(&mut w, &traj)?;
        w.flush()?;
        let mut w = create(&a.common.out, &ename)?;
        io::write_events(&mut w, &traj.events)?;
        w.flush()?;
        let last = traj.len() - 1;
        let (lo, hi) = traj.positions[last]
            .iter()
            .zip(&traj.densities[last])
            .filter(|(z, _)| **z > -20.0 * ell && **z < 0.0)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, r)| {
                (lo.min(*r), hi.max(*r))
            });
        writeln!(
            out,
            "run {k}: x0={:.6} dt={:.3e} events={} rho_range_behind_jump={:.6}",
            frac * ell / rho_l,
            traj.dt,
            traj.events.len(),
            hi - lo
        )?;
        files.push(tname);
    }
    let t_p = model
        .flux(road.v_plus, rho_r)
        .map(|f| ell / f)
        .unwrap_or(0.0);
    write_text(
        &a.common.out,
        "plot.gp",
        &plot::trajectory("FtL", &files, (a.t_end - t_p).max(0.0), a.t_end),
    )?;
    kv(out, "runs", offsets.len())?;
    Ok(())
}

fn viscous_profile(a: &crate::ViscousProfileArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, road) = setup(&a.common)?;
    let report = a.case.resolve(&model, &road)?;
    let ex = viscous_existence(&model, &road, report.rho_minus, report.rho_plus)?;
    kv(out, "case", report.label)?;
    kv(out, "monotone_viscous_profile_exists", ex.exists())?;
    if let Some((lo, hi)) = ex.feasible {
        kv(out, "rho_hat_range", format!("[{lo}, {hi}]"))?;
    }
    let anchors = match (&a.anchors, ex.rho_hat()) {
        (Some(s), _) => parse_list(s, "anchors")?,
        (None, Some(r)) => vec![r],
        (None, None) => {
            return Err(CliError::Nonexistence(format!(
                "case {}: no monotone viscous profile",
                report.label
            )))
        }
    };
    let span = a.xspan.unwrap_or_else(|| default_span(&model, a.epsilon));
    let mut curves = Vec::new();
    for (k, &r0) in anchors.iter().enumerate() {
        let p = stationary_profile(&model, &road, a.epsilon, report.fbar, r0, span)?;
        let name = numbered("viscous", k, anchors.len());
        let mut w = create(&a.common.out, &name)?;
        io::write_viscous_profile(&mut w, &p)?;
        w.flush()?;
        let (l, r) = p.limits();
        writeln!(
            out,
            "anchor {r0:.6}: limits=({l:.6}, {r:.6}) monotone={} max_residual={:.3e}",
            p.is_monotone(1e-10),
            p.max_residual(&model)
        )?;
        curves.push((name, format!("rho(0) = {r0:.4}")));
    }
    write_text(
        &a.common.out,
        "plot.gp",
        &plot::curves(
            &format!("case {} viscous profiles", report.label),
            "rho",
            &curves,
        ),
    )?;
    Ok(())
}

fn viscous_pde(a: &crate::ViscousPdeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, road) = setup(&a.common)?;
    let (rho_l, rho_r) = riemann_states(&a.riemann, &a.case, &model, &road)?;
    let init = PdeState::riemann(rho_l, rho_r, a.x_lo, a.x_hi, a.cells, a.epsilon)?;
    let opts = PdeOptions {
        record_interval: a.record_dt,
        ..PdeOptions::default()
    };
    let run = pde_solve(&init, &model, SpeedLimit::Jump(road), a.t_end, &opts)?;
    let mut w = create(&a.common.out, "pde.csv")?;
    io::write_pde(&mut w, &run.states)?;
    w.flush()?;
    write_text(
        &a.common.out,
        "plot.gp",
        &plot::pde("viscous conservation law", "pde.csv", a.t_end),
    )?;
    let last = run.states.last().expect("at least the initial state");
    kv(out, "steps", run.steps)?;
    kv(out, "max_conservation_error", run.max_conservation_error)?;
    kv(out, "tv_right", last.total_variation(0.0, f64::INFINITY))?;
    kv(out, "tv_left", last.total_variation(f64::NEG_INFINITY, 0.0))?;
    Ok(())
}

fn diagnostics(a: &crate::DiagnosticsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (model, road) = setup(&a.common)?;
    let ell = a.common.ell;
    let report = a.case.resolve(&model, &road)?;
    let opts = a.solver.options(ell)?;
    let x_min = a.solver.x_min(ell)?;
    kv(out, "case", report.label)?;
    if report.verdict == Verdict::None {
        return certify_nonexistence(&model, &road, &report, ell, x_min, &opts, out);
    }
    let q0 = a.q0.unwrap_or(report.rho_plus);
    let (_, result) = solve_member(
        &model,
        &road,
        &report,
        q0,
        InitialChoice::Auto,
        ell,
        x_min,
        &opts,
    )?;
    let assessment = assess_profile(
        &result,
        &model,
        report.rho_minus,
        report.rho_plus,
        ACCEPT_TOL,
    );
    report_assessment(&assessment, out)?;
    let profile = result.map_err(|e| CliError::Nonexistence(e.to_string()))?;
    if let Ok(t) = transversality_report(&profile, &model, opts.slope_cap) {
        kv(out, "transversal_jump", t.passes_jump)?;
        kv(out, "transversal_crossing", t.passes_crossing)?;
        kv(out, "crossing_identity_residual", t.identity_residual)?;
    }
    if let Some(v) = invariant_region_violation(&profile, &model, report.rho_minus) {
        kv(out, "invariant_region_violation", v)?;
    }

    // Trace cars along the profile for one period.
    let mut n = a.cars.max(4);
    let z = loop {
        match generate_positions(&profile, profile.x_min(), 0, n - 1) {
            Ok(z) => break z,
            Err(_) if n > 4 => n -= 1,
            Err(e) => return Err(e.into()),
        }
    };
    kv(
        out,
        "interleaving_violation",
        interleaving_violation(&profile, &z),
    )?;
    let front = profile.eval(z[z.len() - 1]);
    let ens = CarEnsemble::new(z, ell, front, 0)?;
    let t_p = ell / report.fbar;
    let traj = simulate(&ens, &model, &road, t_p, 1e-3, &SimOptions::default())?;
    let exclude = 2;
    kv(out, "period", t_p)?;
    kv(
        out,
        "periodicity_error",
        periodicity_check(&traj, 0.0, t_p, exclude)?,
    )?;
    let mut tracing: f64 = 0.0;
    for (zs, rs) in traj.positions.iter().zip(&traj.densities) {
        for i in 0..zs.len() - exclude {
            tracing = tracing.max((rs[i] - profile.eval(zs[i])).abs());
        }
    }
    kv(out, "tracing_error", tracing)?;
    if !assessment.is_accepted() {
        return Err(CliError::Nonexistence(format!(
            "case {} with Q(0) = {q0}: {}",
            report.label,
            describe(&assessment)
        )));
    }
    Ok(())
}
