//! Flat key=value run configuration with [section] headers. Unknown keys are
//! errors; emission is canonical so parse-emit round trips are byte-stable.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::elliptic::BcSet;
use crate::equilibrium::{
    make_equilibrium, make_potential, ExpProfile, HydrostaticEquilibrium, IdentityProfile,
    LinearProfile, PhysicsParams, PotentialKind, Profile, SlipCoefficient,
};
use crate::error::{Error, Result};
use crate::spectral::AnnulusGrid;
use crate::timestepper::{
    Dynamics, LinearVariant, OutputConfig, Scheme, SeedSpec, SimConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub version: u32,
    // [grid]
    pub a: f64,
    pub b: f64,
    pub nr: usize,
    pub ntheta: usize,
    // [physics]
    pub nu: f64,
    pub rho_star: f64,
    pub alpha: f64,
    pub advection: bool,
    pub buoyancy: bool,
    // [equilibrium]
    pub potential: String,
    pub g: f64,
    pub c0: f64,
    pub series: Vec<(usize, f64, f64)>,
    pub profile: String,
    pub gamma: f64,
    pub beta: f64,
    pub rate: f64,
    // [time]
    pub dt: f64,
    pub t_end: f64,
    pub scheme: String,
    pub bc: String,
    pub dynamics: String,
    pub cfl_limit: f64,
    // [seed]
    pub seed_kind: String,
    pub amplitude: f64,
    pub rng_seed: u64,
    pub seed_path: String,
    pub m_max: usize,
    pub seed_gamma: f64,
    pub seed_beta: f64,
    // [output]
    pub cadence: usize,
    pub snapshot_every: usize,
    pub lyap_gamma: f64,
    pub lyap_beta: f64,
    // [diagnose]
    pub energy_tol: f64,
    pub lyap_tol: f64,
    pub conservation_tol: f64,
    pub assert_identities: bool,
    pub assert_conservation: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION,
            a: 1.0,
            b: 2.0,
            nr: 32,
            ntheta: 64,
            nu: 0.1,
            rho_star: 1.0,
            alpha: 0.0,
            advection: true,
            buoyancy: true,
            potential: "log_radial".into(),
            g: 1.0,
            c0: 0.0,
            series: Vec::new(),
            profile: "linear".into(),
            gamma: 1.0,
            beta: 0.0,
            rate: 1.0,
            dt: 1e-3,
            t_end: 1.0,
            scheme: "cnab2".into(),
            bc: "paper_mixed".into(),
            dynamics: "nonlinear".into(),
            cfl_limit: 0.8,
            seed_kind: "random".into(),
            amplitude: 1e-3,
            rng_seed: 1,
            seed_path: String::new(),
            m_max: 8,
            seed_gamma: 1.0,
            seed_beta: 0.0,
            cadence: 100,
            snapshot_every: 0,
            lyap_gamma: 1.0,
            lyap_beta: 0.0,
            energy_tol: 1e-6,
            lyap_tol: 1e-6,
            conservation_tol: 1e-6,
            assert_identities: true,
            assert_conservation: true,
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse value '{v}' for key '{key}'"),
    })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        other => Err(Error::Parse { line, message: format!("boolean expected for '{key}', got '{other}'") }),
    }
}

/// Parse a config file; the first error is reported with its line number.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Parse { line: lineno, message: format!("malformed section header '{line}'") });
            }
            section = line[1..line.len() - 1].trim().to_string();
            match section.as_str() {
                "meta" | "grid" | "physics" | "equilibrium" | "time" | "seed" | "output"
                | "diagnose" => {}
                other => {
                    return Err(Error::Parse { line: lineno, message: format!("unknown section '[{other}]'") })
                }
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut cfg, &section, key, value, lineno)?;
    }
    validate(&cfg)?;
    Ok(cfg)
}

pub(crate) fn apply_key(
    cfg: &mut RunConfig,
    section: &str,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<()> {
    match (section, key) {
        ("meta", "version") => cfg.version = parse_value(lineno, key, value)?,
        ("grid", "a") => cfg.a = parse_value(lineno, key, value)?,
        ("grid", "b") => cfg.b = parse_value(lineno, key, value)?,
        ("grid", "nr") => cfg.nr = parse_value(lineno, key, value)?,
        ("grid", "ntheta") => cfg.ntheta = parse_value(lineno, key, value)?,
        ("physics", "nu") => cfg.nu = parse_value(lineno, key, value)?,
        ("physics", "rho_star") => cfg.rho_star = parse_value(lineno, key, value)?,
        ("physics", "alpha") => cfg.alpha = parse_value(lineno, key, value)?,
        ("physics", "advection") => cfg.advection = parse_bool(lineno, key, value)?,
        ("physics", "buoyancy") => cfg.buoyancy = parse_bool(lineno, key, value)?,
        ("equilibrium", "potential") => cfg.potential = value.to_string(),
        ("equilibrium", "g") => cfg.g = parse_value(lineno, key, value)?,
        ("equilibrium", "c0") => cfg.c0 = parse_value(lineno, key, value)?,
        ("equilibrium", "profile") => cfg.profile = value.to_string(),
        ("equilibrium", "gamma") => cfg.gamma = parse_value(lineno, key, value)?,
        ("equilibrium", "beta") => cfg.beta = parse_value(lineno, key, value)?,
        ("equilibrium", "rate") => cfg.rate = parse_value(lineno, key, value)?,
        ("equilibrium", k) if k.len() > 1 && (k.starts_with('a') || k.starts_with('b')) && k[1..].chars().all(|c| c.is_ascii_digit()) => {
            let m: usize = k[1..].parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad series key '{k}'"),
            })?;
            if m == 0 {
                return Err(Error::Parse { line: lineno, message: "series keys start at m = 1".into() });
            }
            let coeff: f64 = parse_value(lineno, k, value)?;
            let entry = cfg.series.iter_mut().find(|(mm, _, _)| *mm == m);
            match entry {
                Some(slot) => {
                    if k.starts_with('a') {
                        slot.1 = coeff;
                    } else {
                        slot.2 = coeff;
                    }
                }
                None => {
                    if k.starts_with('a') {
                        cfg.series.push((m, coeff, 0.0));
                    } else {
                        cfg.series.push((m, 0.0, coeff));
                    }
                    cfg.series.sort_by_key(|e| e.0);
                }
            }
        }
        ("time", "dt") => cfg.dt = parse_value(lineno, key, value)?,
        ("time", "t_end") => cfg.t_end = parse_value(lineno, key, value)?,
        ("time", "scheme") => cfg.scheme = value.to_string(),
        ("time", "bc") => cfg.bc = value.to_string(),
        ("time", "dynamics") => cfg.dynamics = value.to_string(),
        ("time", "cfl_limit") => cfg.cfl_limit = parse_value(lineno, key, value)?,
        ("seed", "kind") => cfg.seed_kind = value.to_string(),
        ("seed", "amplitude") => cfg.amplitude = parse_value(lineno, key, value)?,
        ("seed", "rng_seed") => cfg.rng_seed = parse_value(lineno, key, value)?,
        ("seed", "path") => cfg.seed_path = value.to_string(),
        ("seed", "m_max") => cfg.m_max = parse_value(lineno, key, value)?,
        ("seed", "gamma") => cfg.seed_gamma = parse_value(lineno, key, value)?,
        ("seed", "beta") => cfg.seed_beta = parse_value(lineno, key, value)?,
        ("output", "cadence") => cfg.cadence = parse_value(lineno, key, value)?,
        ("output", "snapshot_every") => cfg.snapshot_every = parse_value(lineno, key, value)?,
        ("output", "lyap_gamma") => cfg.lyap_gamma = parse_value(lineno, key, value)?,
        ("output", "lyap_beta") => cfg.lyap_beta = parse_value(lineno, key, value)?,
        ("diagnose", "energy_tol") => cfg.energy_tol = parse_value(lineno, key, value)?,
        ("diagnose", "lyap_tol") => cfg.lyap_tol = parse_value(lineno, key, value)?,
        ("diagnose", "conservation_tol") => cfg.conservation_tol = parse_value(lineno, key, value)?,
        ("diagnose", "assert_identities") => cfg.assert_identities = parse_bool(lineno, key, value)?,
        ("diagnose", "assert_conservation") => cfg.assert_conservation = parse_bool(lineno, key, value)?,
        (s, k) => {
            return Err(Error::Parse {
                line: lineno,
                message: format!("unknown key '{k}' in section '[{s}]'"),
            })
        }
    }
    Ok(())
}

/// Physical-value validation, each error naming the offending key.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    let bad = |key: &str, message: String| Err(Error::Validation { key: key.into(), message });
    if cfg.version != SCHEMA_VERSION {
        return bad("version", format!("unsupported schema version {}", cfg.version));
    }
    if !(cfg.a > 0.0) {
        return bad("a", format!("inner radius must be positive, got {}", cfg.a));
    }
    if !(cfg.b > cfg.a) {
        return bad("b", format!("outer radius must exceed a, got {}", cfg.b));
    }
    if cfg.nr < 3 {
        return bad("nr", "nr must be at least 3".into());
    }
    if cfg.ntheta < 4 || cfg.ntheta % 2 != 0 {
        return bad("ntheta", "ntheta must be even and at least 4".into());
    }
    if !(cfg.nu > 0.0) {
        return bad("nu", format!("viscosity must be positive, got {}", cfg.nu));
    }
    if !(cfg.rho_star > 0.0) {
        return bad("rho_star", format!("reference density must be positive, got {}", cfg.rho_star));
    }
    if cfg.nu / cfg.a + cfg.alpha < 0.0 {
        return bad("alpha", format!("nu/a + alpha = {} < 0", cfg.nu / cfg.a + cfg.alpha));
    }
    if !(cfg.dt > 0.0) {
        return bad("dt", "dt must be positive".into());
    }
    if cfg.t_end < 0.0 {
        return bad("t_end", "t_end must be nonnegative".into());
    }
    match cfg.potential.as_str() {
        "log_radial" | "uniform_vertical" | "harmonic_series" | "radial_linear" => {}
        other => return bad("potential", format!("unknown potential kind '{other}'")),
    }
    match cfg.profile.as_str() {
        "linear" | "exp" | "identity" => {}
        other => return bad("profile", format!("unknown profile '{other}'")),
    }
    match cfg.scheme.as_str() {
        "cnab2" | "imex_bdf2" => {}
        other => return bad("scheme", format!("unknown scheme '{other}'")),
    }
    match cfg.bc.as_str() {
        "paper_mixed" | "both_stress_free" => {}
        other => return bad("bc", format!("unknown bc set '{other}'")),
    }
    match cfg.dynamics.as_str() {
        "nonlinear" | "linear" | "linear_polar" => {}
        other => return bad("dynamics", format!("unknown dynamics '{other}'")),
    }
    match cfg.seed_kind.as_str() {
        "random" | "eigenmode" | "file" | "family_exact" => {}
        other => return bad("seed.kind", format!("unknown seed kind '{other}'")),
    }
    if cfg.cadence == 0 {
        return bad("cadence", "cadence must be at least 1".into());
    }
    Ok(())
}

/// Canonical emission; `parse(emit(cfg))` reproduces `cfg` and re-emission is
/// byte-stable.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[meta]");
    let _ = writeln!(s, "version = {}", cfg.version);
    let _ = writeln!(s, "\n[grid]");
    let _ = writeln!(s, "a = {}", cfg.a);
    let _ = writeln!(s, "b = {}", cfg.b);
    let _ = writeln!(s, "nr = {}", cfg.nr);
    let _ = writeln!(s, "ntheta = {}", cfg.ntheta);
    let _ = writeln!(s, "\n[physics]");
    let _ = writeln!(s, "nu = {}", cfg.nu);
    let _ = writeln!(s, "rho_star = {}", cfg.rho_star);
    let _ = writeln!(s, "alpha = {}", cfg.alpha);
    let _ = writeln!(s, "advection = {}", cfg.advection);
    let _ = writeln!(s, "buoyancy = {}", cfg.buoyancy);
    let _ = writeln!(s, "\n[equilibrium]");
    let _ = writeln!(s, "potential = {}", cfg.potential);
    let _ = writeln!(s, "g = {}", cfg.g);
    let _ = writeln!(s, "c0 = {}", cfg.c0);
    for &(m, am, bm) in &cfg.series {
        if am != 0.0 {
            let _ = writeln!(s, "a{m} = {am}");
        }
        if bm != 0.0 {
            let _ = writeln!(s, "b{m} = {bm}");
        }
    }
    let _ = writeln!(s, "profile = {}", cfg.profile);
    let _ = writeln!(s, "gamma = {}", cfg.gamma);
    let _ = writeln!(s, "beta = {}", cfg.beta);
    let _ = writeln!(s, "rate = {}", cfg.rate);
    let _ = writeln!(s, "\n[time]");
    let _ = writeln!(s, "dt = {}", cfg.dt);
    let _ = writeln!(s, "t_end = {}", cfg.t_end);
    let _ = writeln!(s, "scheme = {}", cfg.scheme);
    let _ = writeln!(s, "bc = {}", cfg.bc);
    let _ = writeln!(s, "dynamics = {}", cfg.dynamics);
    let _ = writeln!(s, "cfl_limit = {}", cfg.cfl_limit);
    let _ = writeln!(s, "\n[seed]");
    let _ = writeln!(s, "kind = {}", cfg.seed_kind);
    let _ = writeln!(s, "amplitude = {}", cfg.amplitude);
    let _ = writeln!(s, "rng_seed = {}", cfg.rng_seed);
    if !cfg.seed_path.is_empty() {
        let _ = writeln!(s, "path = {}", cfg.seed_path);
    }
    let _ = writeln!(s, "m_max = {}", cfg.m_max);
    let _ = writeln!(s, "gamma = {}", cfg.seed_gamma);
    let _ = writeln!(s, "beta = {}", cfg.seed_beta);
    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "cadence = {}", cfg.cadence);
    let _ = writeln!(s, "snapshot_every = {}", cfg.snapshot_every);
    let _ = writeln!(s, "lyap_gamma = {}", cfg.lyap_gamma);
    let _ = writeln!(s, "lyap_beta = {}", cfg.lyap_beta);
    let _ = writeln!(s, "\n[diagnose]");
    let _ = writeln!(s, "energy_tol = {}", cfg.energy_tol);
    let _ = writeln!(s, "lyap_tol = {}", cfg.lyap_tol);
    let _ = writeln!(s, "conservation_tol = {}", cfg.conservation_tol);
    let _ = writeln!(s, "assert_identities = {}", cfg.assert_identities);
    let _ = writeln!(s, "assert_conservation = {}", cfg.assert_conservation);
    s
}

/// Apply a `section.key=value` override.
pub fn apply_override(cfg: &mut RunConfig, spec: &str) -> Result<()> {
    let (path, value) = spec.split_once('=').ok_or_else(|| Error::Arg(format!(
        "override '{spec}' must look like section.key=value"
    )))?;
    let (section, key) = path.trim().split_once('.').ok_or_else(|| Error::Arg(format!(
        "override key '{path}' must look like section.key"
    )))?;
    apply_key(cfg, section.trim(), key.trim(), value.trim(), 0)
}

/// Materialize the solver-facing configuration.
pub fn build_sim_config(cfg: &RunConfig) -> Result<SimConfig> {
    let (equilibrium, params) = build_equilibrium(cfg)?;
    let scheme = match cfg.scheme.as_str() {
        "cnab2" => Scheme::Cnab2,
        _ => Scheme::ImexBdf2,
    };
    let bc_set = match cfg.bc.as_str() {
        "paper_mixed" => BcSet::PaperMixed,
        _ => BcSet::BothStressFree,
    };
    let dynamics = match cfg.dynamics.as_str() {
        "nonlinear" => Dynamics::Nonlinear,
        "linear" => Dynamics::Linear(LinearVariant::General),
        _ => {
            let h_max = equilibrium.h.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Dynamics::Linear(LinearVariant::PolarFGr { h0: h_max })
        }
    };
    let seed = match cfg.seed_kind.as_str() {
        "random" => SeedSpec::Random { amplitude: cfg.amplitude, rng_seed: cfg.rng_seed },
        "eigenmode" => SeedSpec::Eigenmode { amplitude: cfg.amplitude, modes: (0..=cfg.m_max).collect() },
        "file" => SeedSpec::File { path: cfg.seed_path.clone().into() },
        _ => SeedSpec::FamilyExact { gamma: cfg.seed_gamma, beta: cfg.seed_beta },
    };
    let sim = SimConfig {
        params,
        equilibrium,
        dt: cfg.dt,
        t_end: cfg.t_end,
        scheme,
        bc_set,
        dynamics,
        seed,
        output: OutputConfig {
            cadence: cfg.cadence,
            snapshot_every: cfg.snapshot_every,
            lyap_gamma: cfg.lyap_gamma,
            lyap_beta: cfg.lyap_beta,
        },
        advection: cfg.advection,
        buoyancy: cfg.buoyancy,
        cfl_limit: cfg.cfl_limit,
    };
    sim.validate()?;
    Ok(sim)
}

/// Equilibrium alone, for `classify` and `eig`.
pub fn build_equilibrium(cfg: &RunConfig) -> Result<(Arc<HydrostaticEquilibrium>, PhysicsParams)> {
    validate(cfg)?;
    let grid = AnnulusGrid::new(cfg.a, cfg.b, cfg.nr, cfg.ntheta)?;
    let kind = match cfg.potential.as_str() {
        "log_radial" => PotentialKind::LogRadial { g: cfg.g },
        "uniform_vertical" => PotentialKind::UniformVertical { g: cfg.g },
        "harmonic_series" => PotentialKind::HarmonicSeries { c0: cfg.c0, terms: cfg.series.clone() },
        "radial_linear" => PotentialKind::RadialLinear { g: cfg.g },
        _ => unreachable!("validated"),
    };
    let potential = make_potential(kind, &grid)?;
    let profile: Arc<dyn Profile> = match cfg.profile.as_str() {
        "linear" => Arc::new(LinearProfile { gamma: cfg.gamma, beta: cfg.beta }),
        "exp" => Arc::new(ExpProfile { rate: cfg.rate }),
        "identity" => Arc::new(IdentityProfile),
        _ => unreachable!("validated"),
    };
    let equilibrium = Arc::new(make_equilibrium(potential, profile)?);
    let params = PhysicsParams::new(cfg.nu, cfg.rho_star, SlipCoefficient::Constant(cfg.alpha))?;
    Ok((equilibrium, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("[grid]\nnr = 16\nntheta = 16\n").unwrap();
        assert_eq!(cfg.nr, 16);
        assert_eq!(cfg.a, 1.0);
        assert_eq!(cfg.scheme, "cnab2");
    }

    #[test]
    fn negative_viscosity_names_the_key() {
        let err = parse_config("[physics]\nnu = -0.1\n").unwrap_err();
        match err {
            Error::Validation { key, .. } => assert_eq!(key, "nu"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_an_error_with_line() {
        let err = parse_config("[grid]\nnr = 16\nwhatever = 3\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("whatever"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn emit_parse_round_trip_is_byte_stable() {
        let mut cfg = RunConfig::default();
        cfg.series = vec![(2, 0.25, 0.0), (3, 0.0, -1.5)];
        cfg.potential = "harmonic_series".into();
        cfg.dt = 0.0025;
        let once = emit_config(&cfg);
        let reparsed = parse_config(&once).unwrap();
        let twice = emit_config(&reparsed);
        assert_eq!(once, twice);
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::default();
        apply_override(&mut cfg, "equilibrium.gamma=-2.5").unwrap();
        assert_eq!(cfg.gamma, -2.5);
        assert!(apply_override(&mut cfg, "nonsense").is_err());
        assert!(apply_override(&mut cfg, "grid.bogus=1").is_err());
    }

    #[test]
    fn builds_sim_config() {
        let mut cfg = RunConfig::default();
        cfg.nr = 12;
        cfg.ntheta = 8;
        cfg.t_end = 0.01;
        let sim = build_sim_config(&cfg).unwrap();
        assert_eq!(sim.grid().nr, 12);
    }
}
