//! Orchestration: channel sets, cached eigenstate bundles and the four datasets.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use log::info;
use rayon::prelude::*;
use rydent::channels::{ChannelParams, ChannelSet, ChannelSetRecord};
use rydent::classical::{generate_sos, tune_rotational_constant, ClassicalParams, SosDataset};
use rydent::entangle::{
    build_wavepacket, collision_times, entropy_statistics, entropy_trace, plateaus, revival_times,
    short_time_slope, Case, Dynamics, EntropyTrace, Plateau, SlopeFit, WavepacketSpec,
};
use rydent::mqdt::{
    build_overlap_tables, channel_nus, find_eigenstates, window_for_nu, EigenstateRecord,
    OverlapTables,
};
use rydent::numerics::RadialGrid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::output::{fmt_k, num, write_csv, write_json};

pub const CASES: [Case; 2] = [Case::Generic, Case::Resonant];

/// Half-width of the guard band around each collision when measuring plateaus (units of T_e).
pub const PLATEAU_GUARD: f64 = 0.25;
pub const PLATEAU_STEPS: usize = 4;
/// Window (units of T_e) for the time-averaged cross-correlations.
pub const CORRELATION_WINDOW: (f64, f64) = (10.0, 30.0);

fn ratio_for(cfg: &RunConfig, case: Case) -> f64 {
    match case {
        Case::Generic => cfg.physical.ratio,
        Case::Resonant => cfg.physical.resonant_ratio,
    }
}

/// Quantum channel set, with B tuned so that T_e(nu0)/T_rot(J) equals the case ratio.
pub fn channel_set(cfg: &RunConfig, case: Case, k: f64) -> Result<ChannelSet> {
    let p = &cfg.physical;
    let b = tune_rotational_constant(p.nu0, p.j as f64, ratio_for(cfg, case))?;
    Ok(ChannelSet::new(ChannelParams {
        l: p.l,
        j: p.j,
        parity_anchor: p.n0,
        b,
        rotor: p.rotor_convention,
        k,
        delta0: p.delta0,
    })?)
}

/// Classical map parameters for a case.
pub fn classical_params(cfg: &RunConfig, case: Case, k: f64) -> Result<ClassicalParams> {
    let p = &cfg.physical;
    let ratio = match case {
        Case::Generic => p.classical_ratio,
        Case::Resonant => p.resonant_ratio,
    };
    Ok(ClassicalParams::tuned(
        p.l as f64,
        p.j as f64,
        p.classical_nu_ref,
        p.j as f64,
        ratio,
        k,
    )?)
}

pub fn packet_spec(cfg: &RunConfig) -> WavepacketSpec {
    let nu0 = cfg.physical.nu0;
    WavepacketSpec {
        n0: cfg.physical.n0,
        nu_center: nu0,
        sigma_e: cfg.numerical.sigma_e_spacings / nu0.powi(3),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub coefficients: Vec<f64>,
    pub captured_norm: f64,
}

/// Everything the entropy calculations need from one eigenstate solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub key: String,
    pub case: Case,
    pub k: f64,
    pub window: (f64, f64),
    pub channels: ChannelSetRecord,
    pub states: Vec<EigenstateRecord>,
    pub tables: OverlapTables,
    /// Packet expansion, or the reason it could not be built.
    pub packet: std::result::Result<PacketRecord, String>,
}

impl Bundle {
    pub fn packet(&self) -> Result<&PacketRecord> {
        self.packet.as_ref().map_err(|e| anyhow::anyhow!("{e}"))
    }
}

#[derive(Serialize)]
struct KeyInputs<'a> {
    version: &'a str,
    channels: ChannelParams,
    n0: u32,
    nu0: f64,
    r_min: f64,
    grid_points: usize,
    window_half_width: f64,
    sigma_e_spacings: f64,
}

/// Hex SHA-256 of every input that determines a bundle.
pub fn bundle_key(cfg: &RunConfig, ch: &ChannelSet) -> String {
    let inputs = KeyInputs {
        version: env!("CARGO_PKG_VERSION"),
        channels: ch.params,
        n0: cfg.physical.n0,
        nu0: cfg.physical.nu0,
        r_min: cfg.numerical.r_min,
        grid_points: cfg.numerical.grid_points,
        window_half_width: cfg.numerical.window_half_width,
        sigma_e_spacings: cfg.numerical.sigma_e_spacings,
    };
    let bytes = serde_json::to_vec(&inputs).expect("key inputs serialize");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn compute_bundle(
    cfg: &RunConfig,
    case: Case,
    k: f64,
    ch: &ChannelSet,
    key: String,
) -> Result<Bundle> {
    let (nu0, w) = (cfg.physical.nu0, cfg.numerical.window_half_width);
    let window = window_for_nu(ch, cfg.physical.n0, nu0 - w, nu0 + w)?;
    let nu_max = channel_nus(window.1, ch)?.into_iter().fold(0.0, f64::max);
    let grid = Arc::new(RadialGrid::for_nu_max(
        nu_max,
        cfg.numerical.r_min,
        cfg.numerical.grid_points,
    )?);
    let states = find_eigenstates(ch, window, &grid)?;
    let tables = build_overlap_tables(&states)?;
    let packet = build_wavepacket(&packet_spec(cfg), &states)
        .map(|p| PacketRecord {
            coefficients: p.coefficients,
            captured_norm: p.captured_norm,
        })
        .map_err(|e| e.to_string());
    Ok(Bundle {
        key,
        case,
        k,
        window,
        channels: ch.record(),
        states: states.iter().map(|s| s.record()).collect(),
        tables,
        packet,
    })
}

/// Solves (or loads from the cache) the eigenstates for one (case, k).
pub fn solve(cfg: &RunConfig, case: Case, k: f64) -> Result<Bundle> {
    let ch = channel_set(cfg, case, k)?;
    let key = bundle_key(cfg, &ch);
    let path = cfg.cache_dir().join(format!("{key}.json"));
    if cfg.output.cache && path.exists() {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading cache {}", path.display()))?;
        if let Ok(bundle) = serde_json::from_str::<Bundle>(&text) {
            info!("cache hit: {case} k={} ({})", fmt_k(k), path.display());
            return Ok(bundle);
        }
        info!("ignoring unreadable cache entry {}", path.display());
    }
    let bundle = compute_bundle(cfg, case, k, &ch, key)?;
    info!(
        "solved {case} k={}: {} eigenstates",
        fmt_k(k),
        bundle.states.len()
    );
    if cfg.output.cache {
        fs::create_dir_all(cfg.cache_dir())
            .with_context(|| format!("creating cache directory {}", cfg.cache_dir().display()))?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(&bundle)?)
            .with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(bundle)
}

fn jobs(ks: &[f64]) -> Vec<(Case, f64)> {
    CASES
        .iter()
        .flat_map(|&c| ks.iter().map(move |&k| (c, k)))
        .collect()
}

fn out_path(cfg: &RunConfig, name: String) -> PathBuf {
    cfg.output.directory.join(name)
}

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output.directory;
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn sos_dataset(cfg: &RunConfig, case: Case, k: f64) -> Result<SosDataset> {
    let p = classical_params(cfg, case, k)?;
    Ok(generate_sos(
        &p,
        cfg.numerical.ensemble,
        cfg.numerical.n_kicks,
        cfg.numerical.seed,
    )?)
}

pub fn cmd_sos(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    jobs(&cfg.physical.k)
        .par_iter()
        .map(|&(case, k)| {
            let data = sos_dataset(cfg, case, k)?;
            let path = out_path(cfg, format!("sos_{case}_k{}.csv", fmt_k(k)));
            let p = classical_params(cfg, case, k)?;
            let meta = vec![
                ("case", case.to_string()),
                ("k", fmt_k(k)),
                ("B", num(p.b)),
                ("E_total", num(p.e_total)),
                ("escaped_trajectories", data.escaped.len().to_string()),
            ];
            let rows = data.points.iter().map(|pt| {
                vec![
                    pt.trajectory_id.to_string(),
                    pt.kick_index.to_string(),
                    num(pt.phi),
                    num(pt.cos_theta),
                    u8::from(pt.escaped).to_string(),
                ]
            });
            write_csv(
                &path,
                cfg,
                &meta,
                &["trajectory_id", "kick_index", "phi", "cos_theta", "escaped"],
                rows,
            )?;
            Ok(path)
        })
        .collect()
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let written: Vec<Vec<PathBuf>> = jobs(&cfg.physical.k)
        .par_iter()
        .map(|&(case, k)| {
            let bundle = solve(cfg, case, k)?;
            let tag = format!("{case}_k{}", fmt_k(k));
            let n_list = &bundle.channels.n_list;
            let mut header = vec!["index".to_string(), "E".to_string()];
            header.extend(n_list.iter().map(|n| format!("nu{n}")));
            header.extend(n_list.iter().map(|n| format!("Z{n}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = bundle.states.iter().map(|s| {
                let mut row = vec![s.index.to_string(), num(s.energy)];
                row.extend(s.nu.iter().map(|&x| num(x)));
                row.extend(s.z.iter().map(|&x| num(x)));
                row
            });
            let meta = vec![
                ("case", case.to_string()),
                ("k", fmt_k(k)),
                (
                    "window_E",
                    format!("{} {}", bundle.window.0, bundle.window.1),
                ),
                ("cache_key", bundle.key.clone()),
            ];
            let csv = out_path(cfg, format!("spectrum_{tag}.csv"));
            write_csv(&csv, cfg, &meta, &header, rows)?;
            let mut out = vec![csv];
            if cfg.output.channel_json {
                let json = out_path(cfg, format!("channels_{tag}.json"));
                write_json(
                    &json,
                    cfg,
                    &serde_json::json!({ "case": case, "k": k, "channels": bundle.channels }),
                )?;
                out.push(json);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(written.into_iter().flatten().collect())
}

/// One row of the stationary-entropy table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticRow {
    pub k: f64,
    pub case: Case,
    pub mean: f64,
    pub rms: f64,
    pub n_states: usize,
}

pub fn static_rows(cfg: &RunConfig) -> Result<Vec<StaticRow>> {
    let mut rows: Vec<StaticRow> = jobs(&cfg.physical.static_k)
        .par_iter()
        .map(|&(case, k)| {
            let bundle = solve(cfg, case, k)?;
            let (mean, rms) = entropy_statistics(&bundle.tables)?;
            Ok(StaticRow {
                k,
                case,
                mean,
                rms,
                n_states: bundle.states.len(),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| {
        a.k.total_cmp(&b.k)
            .then((a.case as u8).cmp(&(b.case as u8)))
    });
    Ok(rows)
}

pub fn cmd_static_entropy(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let rows = static_rows(cfg)?;
    let path = out_path(cfg, "static_entropy.csv".into());
    let lines = rows.iter().map(|r| {
        vec![
            fmt_k(r.k),
            r.case.to_string(),
            num(r.mean),
            num(r.rms),
            r.n_states.to_string(),
        ]
    });
    write_csv(
        &path,
        cfg,
        &[],
        &["k", "case", "mean_S2", "rms_S2", "n_states"],
        lines,
    )?;
    Ok(vec![path])
}

fn linspace(max: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| {
            if i + 1 == points {
                max
            } else {
                max * i as f64 / (points - 1) as f64
            }
        })
        .collect()
}

/// Time-averaged |C_{NN′}|² for one channel pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub n: u32,
    pub n_prime: u32,
    pub mean_abs_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub case: Case,
    pub k: f64,
    pub n_states: usize,
    pub captured_norm: f64,
    pub t_e: f64,
    pub collision_times_over_te: Vec<f64>,
    pub slope: std::result::Result<SlopeFit, String>,
    pub plateaus: std::result::Result<Vec<Plateau>, String>,
    pub t_e_rev: f64,
    pub t_0_rev: f64,
    pub long_time_mean: f64,
    pub max_s2: f64,
    pub max_trace_deviation: f64,
    pub correlation_window: (f64, f64),
    pub correlations: Vec<CorrelationSummary>,
}

/// Short and long traces plus diagnostics for one (case, k).
#[derive(Debug, Clone)]
pub struct TimeResult {
    pub short: EntropyTrace,
    pub long: EntropyTrace,
    pub diagnostics: Diagnostics,
}

pub fn time_result(cfg: &RunConfig, case: Case, k: f64) -> Result<TimeResult> {
    let bundle = solve(cfg, case, k)?;
    let packet = bundle.packet()?;
    let spec = packet_spec(cfg);
    let t_e = spec.kepler_period();
    let n = &cfg.numerical;
    let c = &packet.coefficients;
    let short = entropy_trace(
        c,
        &bundle.tables,
        &linspace(n.short_time_max, n.short_time_points),
        t_e,
        k,
        case,
    )?;
    let long = entropy_trace(
        c,
        &bundle.tables,
        &linspace(n.long_time_max, n.long_time_points),
        t_e,
        k,
        case,
    )?;

    let m_max = (n.short_time_max - 0.5).max(0.0).floor() as usize;
    let collisions = collision_times(t_e, m_max);
    let dynamics = Dynamics::new(c, &bundle.tables)?;
    let nc = bundle.tables.n_channels();
    let window_times: Vec<f64> = long
        .times
        .iter()
        .copied()
        .filter(|x| (CORRELATION_WINDOW.0..=CORRELATION_WINDOW.1).contains(x))
        .collect();
    let mut sums = vec![0.0; nc * nc];
    for x in &window_times {
        let m = dynamics.correlation_matrix(x * t_e);
        for (s, v) in sums.iter_mut().zip(m.transpose().iter()) {
            *s += v.norm_sqr();
        }
    }
    let list = &bundle.tables.n_list;
    let correlations = (0..nc * nc)
        .map(|i| CorrelationSummary {
            n: list[i / nc],
            n_prime: list[i % nc],
            mean_abs_sq: sums[i] / window_times.len().max(1) as f64,
        })
        .collect();
    let max_trace_deviation = long
        .times
        .par_iter()
        .map(|x| (dynamics.trace(x * t_e) - 1.0).norm())
        .reduce(|| 0.0, f64::max);
    let (t_e_rev, t_0_rev) = revival_times(&channel_set(cfg, case, k)?, spec.nu_center);
    let diagnostics = Diagnostics {
        case,
        k,
        n_states: bundle.states.len(),
        captured_norm: packet.captured_norm,
        t_e,
        collision_times_over_te: collisions.iter().map(|t| t / t_e).collect(),
        slope: short_time_slope(&short, &collisions).map_err(|e| e.to_string()),
        plateaus: plateaus(&short, PLATEAU_GUARD, PLATEAU_STEPS).map_err(|e| e.to_string()),
        t_e_rev,
        t_0_rev,
        long_time_mean: long.mean_between(n.long_average_from, n.long_time_max)?,
        max_s2: long
            .s2
            .iter()
            .chain(&short.s2)
            .copied()
            .fold(f64::MIN, f64::max),
        max_trace_deviation,
        correlation_window: CORRELATION_WINDOW,
        correlations,
    };
    Ok(TimeResult {
        short,
        long,
        diagnostics,
    })
}

fn write_trace(path: &Path, cfg: &RunConfig, trace: &EntropyTrace) -> Result<()> {
    let spec = packet_spec(cfg);
    let meta = vec![
        ("k", fmt_k(trace.k)),
        ("case", trace.case.to_string()),
        ("nu_center", num(spec.nu_center)),
        ("N0", spec.n0.to_string()),
        ("sigma_E", num(spec.sigma_e)),
        ("T_e", num(trace.t_e)),
        ("seed", "none".into()),
    ];
    let rows = trace
        .times
        .iter()
        .zip(&trace.s2)
        .map(|(t, s)| vec![num(*t), num(*s)]);
    write_csv(path, cfg, &meta, &["t_over_Te", "S2"], rows)
}

pub fn cmd_time_entropy(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_out(cfg)?;
    let written: Vec<Vec<PathBuf>> = jobs(&cfg.physical.k)
        .par_iter()
        .map(|&(case, k)| {
            let r = time_result(cfg, case, k)?;
            let tag = format!("{case}_k{}", fmt_k(k));
            let short = out_path(cfg, format!("entropy_short_{tag}.csv"));
            let long = out_path(cfg, format!("entropy_long_{tag}.csv"));
            write_trace(&short, cfg, &r.short)?;
            write_trace(&long, cfg, &r.long)?;
            let mut out = vec![short, long];
            if cfg.output.diagnostics_json {
                let json = out_path(cfg, format!("diagnostics_{tag}.json"));
                write_json(&json, cfg, &r.diagnostics)?;
                out.push(json);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(written.into_iter().flatten().collect())
}

pub fn cmd_all(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = cmd_sos(cfg)?;
    out.extend(cmd_spectrum(cfg)?);
    out.extend(cmd_static_entropy(cfg)?);
    out.extend(cmd_time_entropy(cfg)?);
    Ok(out)
}
