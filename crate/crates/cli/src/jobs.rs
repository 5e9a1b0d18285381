//! Job execution. Each job returns its artifacts; nothing touches the disk here.

use std::fs;
use std::path::{Path, PathBuf};

use gmatern::estimators::{box_intensity, empirical_cdf_distance, pair_correlation};
use gmatern::extremal::{
    accumulate_surface, default_buffer, fidi_prob_pi, simulate_m3_truncated, surface_at, thin_extremal_dominance,
    thin_visible_centres, CoxExtremalSimulator, FidiIntensity,
};
use gmatern::io::{field_to_csv, pattern_from_csv, pattern_to_csv, FieldMeta, PatternMeta, StoredPattern};
use gmatern::palm::{first_order_intensity_mc, matern1_thinned_intensity, matern2_thinned_intensity, second_order_intensity_mc};
use gmatern::sampler::{attach_marks, sample_poisson, LgcpSimulator};
use gmatern::thinning::thin;
use gmatern::{
    GridField, Grid, IntensityEstimate, IntensitySource, MarkedPointPattern, PalmConfig, PointPattern, Preset, RngStream,
    ThinningModel, Window,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{shape, window, EstimateJob, ExtremalJob, IntensityJob, Job, SimulateLgcpJob, ThinJob};
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

pub fn execute(job: &Job, seed: u64) -> CliResult<Artifacts> {
    match job {
        Job::SimulateLgcp(j) => simulate_lgcp(j, seed),
        Job::Thin(j) => thin_job(j, seed),
        Job::Intensity(j) => intensity(j, seed),
        Job::Extremal(j) => extremal(j, seed),
        Job::Estimate(j) => estimate(j),
    }
}

fn pattern_meta(p: &StoredPattern, seed: u64) -> PatternMeta {
    p.meta(Some(seed))
}

fn field_meta(f: &GridField, seed: u64) -> FieldMeta {
    FieldMeta {
        window: f.grid().window().clone(),
        dim: f.grid().dim(),
        cells_per_axis: f.grid().cells_per_axis().to_vec(),
        seed: Some(seed),
    }
}

fn add_pattern(out: &mut Artifacts, stem: &str, p: StoredPattern, seed: u64) -> CliResult<()> {
    out.add(format!("{stem}.csv"), pattern_to_csv(&p)?);
    out.add_json(format!("{stem}.json"), &pattern_meta(&p, seed))
}

fn add_field(out: &mut Artifacts, stem: &str, f: &GridField, seed: u64) -> CliResult<()> {
    out.add(format!("{stem}.csv"), field_to_csv(f)?);
    out.add_json(format!("{stem}.json"), &field_meta(f, seed))
}

fn positive_count(name: &str, n: usize) -> CliResult<()> {
    if n == 0 {
        Err(CliError::config(format!("`{name}` must be at least 1")))
    } else {
        Ok(())
    }
}

fn simulate_lgcp(job: &SimulateLgcpJob, seed: u64) -> CliResult<Artifacts> {
    positive_count("replicates", job.replicates)?;
    let w = window(&job.lower, &job.upper)?;
    let grid = Grid::uniform(w.clone(), job.cells)?;
    let source = job.source.resolve()?;
    let root = RngStream::new(seed);
    let reps: Vec<(PointPattern, GridField)> = match &source {
        IntensitySource::Constant { lambda } => (0..job.replicates as u64)
            .into_par_iter()
            .map(|k| Ok((sample_poisson(*lambda, &w, root.derive(k))?, GridField::constant(grid.clone(), *lambda))))
            .collect::<CliResult<_>>()?,
        IntensitySource::Lgcp { spec } => {
            let sim = LgcpSimulator::new(spec, &grid)?;
            (0..job.replicates as u64).into_par_iter().map(|k| sim.sample(root.derive(k))).collect()
        }
    };
    let mut out = Artifacts::default();
    for (k, (p, f)) in reps.into_iter().enumerate() {
        add_pattern(&mut out, &format!("pattern_{k:03}"), StoredPattern::Unmarked(p), seed)?;
        add_field(&mut out, &format!("field_{k:03}"), &f, seed)?;
    }
    Ok(out)
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn read_pattern(path: &Path) -> CliResult<StoredPattern> {
    let meta_path = sidecar(path);
    let meta: PatternMeta = serde_json::from_str(&read(&meta_path)?)
        .map_err(|e| CliError::io(format!("{}: {e}", meta_path.display())))?;
    pattern_from_csv(&read(path)?, meta.window).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct ThinReport {
    input_count: usize,
    retained_count: usize,
    /// Retained over input points, both counted in the cropped window.
    retention_rate: f64,
    window: Window,
    preset: Preset,
    p0: f64,
}

fn thin_job(job: &ThinJob, seed: u64) -> CliResult<Artifacts> {
    let input = read_pattern(&job.input)?;
    let w = input.ground().window().clone();
    let preset = job.preset.resolve(&w)?;
    let model = ThinningModel::from_preset(preset.clone(), job.p0)?;
    let crop = if job.dilation > 0.0 { w.erode(job.dilation)? } else { w.clone() };
    let root = RngStream::new(seed);
    let marked: MarkedPointPattern = match input {
        StoredPattern::Marked(m) => m,
        StoredPattern::Unmarked(g) => {
            let law = preset.natural_mark_law(job.tau, job.shape.parse()?);
            law.validate()?;
            attach_marks(&g, &law, root.derive_named("marks"))?
        }
    };
    let kept = thin(&model, &marked, root.derive_named("thin")).restrict(&crop);
    let before = marked.ground().count_in(&crop);
    let report = ThinReport {
        input_count: before,
        retained_count: kept.len(),
        retention_rate: if before > 0 { kept.len() as f64 / before as f64 } else { 0.0 },
        window: crop,
        preset,
        p0: job.p0,
    };
    let mut out = Artifacts::default();
    add_pattern(&mut out, "thinned", StoredPattern::Marked(kept), seed)?;
    out.add_json("report.json", &report)?;
    Ok(out)
}

fn intensity(job: &IntensityJob, seed: u64) -> CliResult<Artifacts> {
    let d = job.xi.len();
    if d == 0 {
        return Err(CliError::config("`xi` needs at least one coordinate"));
    }
    let source = job.source.resolve()?;
    // the dominance grid, if any, covers a box around the evaluation points
    let mut pts: Vec<&[f64]> = vec![&job.xi];
    if !job.eta.is_empty() {
        if job.eta.len() != d {
            return Err(CliError::config("`eta` must have the dimension of `xi`"));
        }
        pts.push(&job.eta);
    }
    let lo: Vec<f64> = (0..d).map(|a| pts.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|a| pts.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let around = |r: f64| Window::new(lo.iter().map(|v| v - r).collect(), hi.iter().map(|v| v + r).collect());
    let preset = job.preset.resolve(&around(3.0)?)?;
    let model = ThinningModel::from_preset(preset.clone(), job.p0)?;

    let est = match job.mode.as_str() {
        "closed-form" => {
            let lambda = match source {
                IntensitySource::Constant { lambda } => lambda,
                _ => return Err(CliError::config("closed-form needs a constant `lambda`")),
            };
            let v = match preset {
                Preset::MaternI { radius } => matern1_thinned_intensity(lambda, radius, d)?,
                Preset::MaternII { radius } => matern2_thinned_intensity(lambda, radius, d)?,
                _ => return Err(CliError::config("closed-form is available for matern_i and matern_ii only")),
            };
            IntensityEstimate::exact(job.p0 * v)
        }
        "mc-first-order" | "mc-second-order" => {
            let reach = model.truncation_radius().unwrap_or(3.0) + job.spacing;
            let quad_window = around(reach)?;
            let grid = Grid::with_spacing(quad_window.clone(), job.spacing)?;
            let mut cfg = PalmConfig::new(job.n_psi, job.n_mark);
            cfg.n_mark_inner = job.n_mark_inner;
            if matches!(source, IntensitySource::Lgcp { .. }) {
                cfg = cfg.with_field_grid(Grid::with_spacing(quad_window, job.field_spacing)?);
            }
            let law = job.mark_law(&preset)?;
            let rng = RngStream::new(seed);
            if job.mode == "mc-first-order" {
                first_order_intensity_mc(&source, &model, &law, &job.xi, &grid, &cfg, rng)?
            } else {
                if job.eta.is_empty() {
                    return Err(CliError::config("mc-second-order needs `eta`"));
                }
                second_order_intensity_mc(&source, &model, &law, &job.xi, &job.eta, &grid, &cfg, rng)?
            }
        }
        other => return Err(CliError::config(format!("unknown intensity mode `{other}`"))),
    };
    let mut out = Artifacts::default();
    out.add_json("intensity.json", &est)?;
    Ok(out)
}

#[derive(Serialize)]
struct ReplicateCounts {
    storms: usize,
    retained: usize,
    retained_in_window: usize,
    surface_max: f64,
}

#[derive(Serialize)]
struct ExtremalReport {
    mode: String,
    tau: f64,
    buffer: f64,
    replicates: Vec<ReplicateCounts>,
    /// Retained points per unit volume of the window.
    retained_intensity: Option<IntensityEstimate>,
}

#[derive(Serialize)]
struct MdaEntry {
    n: usize,
    z_min: f64,
    distance: f64,
    points_used: usize,
}

#[derive(Serialize)]
struct MdaReport {
    tau: f64,
    point: Vec<f64>,
    replicates: usize,
    blocks: Vec<MdaEntry>,
}

#[derive(Serialize)]
struct FidiReport {
    tau: f64,
    points: Vec<f64>,
    thresholds: Vec<f64>,
    replicates: usize,
    empirical: f64,
    binomial_std_error: f64,
    quadrature: f64,
}

enum Storms {
    M3,
    Cox(Box<CoxExtremalSimulator>),
}

fn extremal(job: &ExtremalJob, seed: u64) -> CliResult<Artifacts> {
    positive_count("replicates", job.replicates)?;
    let w = window(&job.lower, &job.upper)?;
    let d = w.dim();
    let shp = shape(&job.shape, d)?;
    let buffer = job.buffer.unwrap_or_else(|| default_buffer(&shp));
    let big = w.dilate(buffer)?;
    let grid = Grid::with_spacing(w.clone(), job.spacing)?;
    let root = RngStream::new(seed);
    let storms = if job.mode == "m3" {
        if !(job.tau > 0.0) {
            return Err(CliError::config(format!("`tau` must be > 0, got {}", job.tau)));
        }
        Storms::M3
    } else {
        let source = job.source.resolve()?;
        Storms::Cox(Box::new(CoxExtremalSimulator::new(&source, shp, job.tau, &Grid::with_spacing(big.clone(), job.field_spacing)?)?))
    };
    let draw = |rng: RngStream| -> CliResult<(MarkedPointPattern, Option<GridField>)> {
        Ok(match &storms {
            Storms::M3 => (simulate_m3_truncated(&shp, job.tau, &w, buffer, rng)?, None),
            Storms::Cox(sim) => {
                let (s, psi) = sim.sample(rng);
                (s, Some(psi))
            }
        })
    };
    let points = if job.points.is_empty() { w.centre() } else { job.points.clone() };
    if !points.len().is_multiple_of(d) {
        return Err(CliError::config("`points` must hold whole points"));
    }
    let mut out = Artifacts::default();

    match job.mode.as_str() {
        "m3" | "cox" | "matern-extremal" | "visible-centres" => {
            let dom_grid = Grid::with_spacing(big.clone(), job.dominance_spacing)?;
            let reps: Vec<(MarkedPointPattern, GridField, ReplicateCounts)> = (0..job.replicates as u64)
                .into_par_iter()
                .map(|k| {
                    let (all, _) = draw(root.derive(k))?;
                    let kept = match job.mode.as_str() {
                        "matern-extremal" => thin_extremal_dominance(&all, &dom_grid)?,
                        "visible-centres" => thin_visible_centres(&all)?,
                        _ => all.clone(),
                    };
                    let surface = accumulate_surface(&kept, &grid)?;
                    let counts = ReplicateCounts {
                        storms: all.len(),
                        retained: kept.len(),
                        retained_in_window: kept.ground().count_in(&w),
                        surface_max: surface.max(),
                    };
                    Ok((kept, surface.to_field(), counts))
                })
                .collect::<CliResult<_>>()?;
            let per_volume: Vec<f64> = reps.iter().map(|r| r.2.retained_in_window as f64 / w.volume()).collect();
            let mut counts = Vec::with_capacity(reps.len());
            for (k, (kept, surface, c)) in reps.into_iter().enumerate() {
                add_pattern(&mut out, &format!("points_{k:03}"), StoredPattern::Marked(kept), seed)?;
                add_field(&mut out, &format!("surface_{k:03}"), &surface, seed)?;
                counts.push(c);
            }
            let report = ExtremalReport {
                mode: job.mode.clone(),
                tau: job.tau,
                buffer,
                replicates: counts,
                retained_intensity: (per_volume.len() >= 2).then(|| IntensityEstimate::from_samples(&per_volume, 1)),
            };
            out.add_json("report.json", &report)?;
        }
        "mda" => {
            if points.len() != d {
                return Err(CliError::config("mda takes a single evaluation point"));
            }
            let mut blocks = Vec::new();
            for &n in &job.mda_n {
                positive_count("mda_n", n)?;
                let stream = root.derive_named("mda").derive(n as u64);
                let samples: Vec<f64> = (0..job.replicates as u64)
                    .into_par_iter()
                    .map(|k| {
                        let rep = stream.derive(k);
                        let mut best = 0.0f64;
                        for i in 0..n as u64 {
                            let (s, _) = draw(rep.derive(i))?;
                            best = best.max(surface_at(&s, &points)?[0]);
                        }
                        Ok(best / n as f64)
                    })
                    .collect::<CliResult<_>>()?;
                let z_min = 5.0 * job.tau / n as f64;
                let dist = empirical_cdf_distance(&samples, frechet, z_min)?;
                let mut csv = String::from("value\n");
                for v in &samples {
                    csv.push_str(&format!("{v}\n"));
                }
                out.add(format!("mda_n{n}.csv"), csv);
                blocks.push(MdaEntry {
                    n,
                    z_min,
                    distance: dist.distance,
                    points_used: dist.points_used,
                });
            }
            out.add_json(
                "report.json",
                &MdaReport {
                    tau: job.tau,
                    point: points,
                    replicates: job.replicates,
                    blocks,
                },
            )?;
        }
        "fidi" => {
            if job.thresholds.len() * d != points.len() {
                return Err(CliError::config("`thresholds` needs one value per point"));
            }
            let reps: Vec<(bool, Option<GridField>)> = (0..job.replicates as u64)
                .into_par_iter()
                .map(|k| {
                    let (s, psi) = draw(root.derive(k))?;
                    let y = surface_at(&s, &points)?;
                    Ok((y.iter().zip(&job.thresholds).all(|(a, b)| a <= b), psi))
                })
                .collect::<CliResult<_>>()?;
            let n = reps.len() as f64;
            let p_hat = reps.iter().filter(|r| r.0).count() as f64 / n;
            let psi = match &job.source.lambda {
                _ if job.mode == "m3" => FidiIntensity::Constant(1.0),
                Some(l) => FidiIntensity::Constant(*l),
                None => FidiIntensity::Fields(reps.into_iter().filter_map(|r| r.1).collect()),
            };
            let quad = fidi_prob_pi(&psi, &shp, job.tau, &points, &job.thresholds, &Grid::with_spacing(big, job.spacing)?)?;
            out.add_json(
                "report.json",
                &FidiReport {
                    tau: job.tau,
                    points,
                    thresholds: job.thresholds.clone(),
                    replicates: job.replicates,
                    empirical: p_hat,
                    binomial_std_error: (quad * (1.0 - quad) / n).sqrt(),
                    quadrature: quad,
                },
            )?;
        }
        other => return Err(CliError::config(format!("unknown extremal mode `{other}`"))),
    }
    Ok(out)
}

fn frechet(z: f64) -> f64 {
    if z > 0.0 {
        (-1.0 / z).exp()
    } else {
        0.0
    }
}

fn inputs(pattern: &str) -> CliResult<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::config(format!("input glob: {e}")))?
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(e.to_string()))?;
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::io(format!("no files match `{pattern}`")));
    }
    Ok(paths)
}

/// Values of one column of a CSV table, with line-numbered errors.
pub fn read_column(path: &Path, column: &str) -> CliResult<Vec<f64>> {
    let text = read(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let idx = header
        .iter()
        .position(|h| *h == column)
        .ok_or_else(|| CliError::io(format!("{}: no column `{column}`", path.display())))?;
    lines
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .nth(idx)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::io(format!("{}: line {}: bad value in `{column}`", path.display(), i + 2)))
        })
        .collect()
}

#[derive(Serialize)]
struct CdfReport {
    files: usize,
    samples: usize,
    scale: f64,
    z_min: f64,
    distance: f64,
    points_used: usize,
}

fn estimate(job: &EstimateJob) -> CliResult<Artifacts> {
    let paths = inputs(&job.input)?;
    let mut out = Artifacts::default();
    match job.statistic.as_str() {
        "intensity" | "pcf" => {
            let pats: Vec<PointPattern> =
                paths.iter().map(|p| Ok(read_pattern(p)?.ground().clone())).collect::<CliResult<_>>()?;
            if job.statistic == "intensity" {
                let region = if job.region_lower.is_empty() && job.region_upper.is_empty() {
                    pats[0].window().clone()
                } else {
                    window(&job.region_lower, &job.region_upper)?
                };
                out.add_json("intensity.json", &box_intensity(&pats, &region)?)?;
            } else {
                let est = pair_correlation(&pats, job.r_max, job.n_bins, job.border.unwrap_or(job.r_max))?;
                let mut csv = String::from("r,g,g_se,rho2,rho2_se,count\n");
                for k in 0..est.radii.len() {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        est.radii[k], est.g_values[k], est.g_std_errors[k], est.rho2_values[k], est.rho2_std_errors[k], est.counts[k]
                    ));
                }
                out.add("pcf.csv", csv);
                out.add_json("pcf.json", &est)?;
            }
        }
        "cdf" => {
            let mut samples = Vec::new();
            for p in &paths {
                samples.extend(read_column(p, &job.column)?.into_iter().map(|v| v * job.scale));
            }
            if samples.is_empty() {
                return Err(CliError::io("no samples in the input files"));
            }
            let dist = empirical_cdf_distance(&samples, frechet, job.z_min)?;
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len() as f64;
            let mut csv = String::from("z,empirical,reference\n");
            for (i, z) in sorted.iter().enumerate() {
                csv.push_str(&format!("{z},{},{}\n", (i + 1) as f64 / n, frechet(*z)));
            }
            out.add("cdf.csv", csv);
            out.add_json(
                "cdf.json",
                &CdfReport {
                    files: paths.len(),
                    samples: samples.len(),
                    scale: job.scale,
                    z_min: job.z_min,
                    distance: dist.distance,
                    points_used: dist.points_used,
                },
            )?;
        }
        other => return Err(CliError::config(format!("unknown statistic `{other}`"))),
    }
    Ok(out)
}
