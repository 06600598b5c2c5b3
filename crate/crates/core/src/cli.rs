//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::collision::{contact_points, separation_field, soft_separation_distance, Side};
use crate::config::{LoadedScene, SceneConfig};
use crate::dynamics::{evaluate_contacts, step, Integrator, SceneState};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::linalg::Vec3;
use crate::real::Dual;
use crate::smooth::Temperature;
use crate::ssdf::{sample_sdf_grid, GridSpec};
use crate::verify::{check_pipeline_gradients, hard_pipeline_oracle, random_state, GradCheckReport, Jitter};

#[derive(Debug, Parser)]
#[command(name = "softcontact", version, about = "Smooth collision detection and soft-minimum contact simulation")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scene description (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub integrator: Option<Integrator>,
    /// SSDF temperature (m²).
    #[arg(long, global = true)]
    pub eps1: Option<f64>,
    /// Separation-distribution temperature (m).
    #[arg(long, global = true)]
    pub eps2: Option<f64>,
    /// Spring softplus temperature (m).
    #[arg(long, global = true)]
    pub eps3: Option<f64>,
    /// Suppress summaries on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out the scene and write its trajectory.
    Simulate {
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Sample the SSDF of one body on a lattice in its own frame, once per temperature.
    SdfGrid {
        /// Body to sample (default: the first).
        #[arg(long)]
        body: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_vec3)]
        lower: Option<[f64; 3]>,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_vec3)]
        upper: Option<[f64; 3]>,
        /// Nodes per axis, e.g. `101,101,1`.
        #[arg(long, value_parser = parse_counts, default_value = "64,64,1")]
        resolution: [usize; 3],
        /// Comma-separated ε₁ values (m²); defaults to the scene's ε₁.
        #[arg(long, value_delimiter = ',')]
        temperatures: Vec<f64>,
        /// Fixed-coordinate plane such as `z=0`.
        #[arg(long, value_parser = parse_slice)]
        slice: Option<(usize, f64)>,
    },
    /// Move one free body along an axis and record the contact force on it.
    ForceSweep {
        /// Moving body (default: the second).
        #[arg(long)]
        moving: Option<String>,
        #[arg(long, value_enum, default_value_t = Axis::Y)]
        axis: Axis,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 201)]
        samples: usize,
    },
    /// Report the separation field of one pair.
    Collide {
        #[arg(long, default_value_t = 0)]
        pair: usize,
        /// Evaluate the pair in reversed order.
        #[arg(long)]
        swap: bool,
        /// Number of soft top-K contact points to extract.
        #[arg(long)]
        k: Option<usize>,
        /// Top-K temperature; defaults to 1e-3 times the spread of the vertex weights.
        #[arg(long)]
        tau: Option<f64>,
        /// Translation override `name=x,y,z`; may repeat.
        #[arg(long = "position", value_parser = parse_named_vec3)]
        positions: Vec<(String, [f64; 3])>,
    },
    /// Compare forward-mode derivatives with finite differences at random states.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Time single steps of the scene in contact and with bodies pulled apart.
    Bench {
        #[arg(long, default_value_t = 100)]
        repetitions: usize,
        /// Comma-separated point counts for generated shapes; defaults to the config's.
        #[arg(long, value_delimiter = ',')]
        resolutions: Vec<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_counts(s: &str) -> std::result::Result<[usize; 3], String> {
    let v: Vec<usize> = s.split(',').map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"))).collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| "expected 3 comma-separated counts".to_string())
}

fn parse_slice(s: &str) -> std::result::Result<(usize, f64), String> {
    let (axis, value) = s.split_once('=').ok_or("expected axis=value")?;
    let axis = match axis.trim() {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        other => return Err(format!("unknown axis {other:?}")),
    };
    Ok((axis, value.trim().parse::<f64>().map_err(|e| e.to_string())?))
}

fn parse_named_vec3(s: &str) -> std::result::Result<(String, [f64; 3]), String> {
    let (name, v) = s.split_once('=').ok_or("expected name=x,y,z")?;
    Ok((name.trim().to_string(), parse_vec3(v)?))
}

/// Process exit status for an outcome.
pub fn exit_code(result: &Result<bool>) -> u8 {
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Error::Diverged { .. }) => 2,
        Err(_) => 1,
    }
}

/// Run a parsed command. `Ok(false)` marks a completed run whose check failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let common = &cli.common;
    let loaded = load(common)?;
    std::fs::create_dir_all(&common.out)?;
    match &cli.command {
        Command::Simulate { duration } => simulate(common, loaded, *duration),
        Command::SdfGrid { body, lower, upper, resolution, temperatures, slice } => {
            sdf_grid(common, &loaded, body.as_deref(), *lower, *upper, *resolution, temperatures, *slice)
        }
        Command::ForceSweep { moving, axis, from, to, samples } => force_sweep(common, &loaded, moving.as_deref(), *axis, *from, *to, *samples),
        Command::Collide { pair, swap, k, tau, positions } => collide(common, loaded, *pair, *swap, *k, *tau, positions),
        Command::Gradcheck { samples, h, tol } => gradcheck(common, &loaded, *samples, *h, *tol),
        Command::Bench { repetitions, resolutions } => bench(common, *repetitions, resolutions),
    }
}

fn config_path(common: &Common) -> Result<&Path> {
    common.config.as_deref().ok_or_else(|| Error::Config("--config is required".into()))
}

fn load_config(common: &Common) -> Result<SceneConfig> {
    let mut cfg = SceneConfig::load(config_path(common)?)?;
    if let Some(dt) = common.dt {
        cfg.world.dt = dt;
    }
    if let Some(i) = common.integrator {
        cfg.world.integrator = i;
    }
    for (slot, v) in [(&mut cfg.contact.eps1, common.eps1), (&mut cfg.contact.eps2, common.eps2), (&mut cfg.contact.eps3, common.eps3)] {
        if let Some(v) = v {
            *slot = Temperature::new(v).map_err(|e| Error::Config(e.to_string()))?;
        }
    }
    Ok(cfg)
}

fn base_dir(common: &Common) -> PathBuf {
    common
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn load(common: &Common) -> Result<LoadedScene> {
    load_config(common)?.build(&base_dir(common), None)
}

fn create(common: &Common, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(common.out.join(name))?))
}

fn say(common: &Common, text: &str) {
    if !common.quiet {
        print!("{text}");
    }
}

fn write_state_rows(w: &mut dyn Write, loaded: &LoadedScene, s: &SceneState<f64>) -> Result<()> {
    let scene = &loaded.scene;
    for (id, body) in scene.bodies().iter().enumerate() {
        let (pose, lin, ang) = match (scene.offset(id), &body.kind) {
            (Some(o), _) => {
                let k = scene.free_bodies().position(|b| b == id).expect("free body");
                (s.poses[k], Vec3::from_slice(&s.v[o..o + 3]), Vec3::from_slice(&s.v[o + 3..o + 6]))
            }
            (None, crate::dynamics::BodyKind::Kinematic(tr)) => {
                let k = tr.sample(s.t);
                (k.pose, k.linear, k.angular)
            }
            (None, _) => unreachable!("bodies without offsets are kinematic"),
        };
        let (t, q) = (pose.translation, pose.orientation);
        writeln!(
            w,
            "{},{id},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t, t.x, t.y, t.z, q.w, q.x, q.y, q.z, lin.x, lin.y, lin.z, ang.x, ang.y, ang.z
        )?;
    }
    Ok(())
}

/// Wall-time statistics of a rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutSummary {
    pub steps: usize,
    pub final_state: SceneState<f64>,
    pub step_ms: (f64, f64, f64),
    /// `−min` over every separation-field entry seen.
    pub max_penetration: f64,
}

/// Roll out `loaded` with its world settings, streaming trajectory rows to `w`.
pub fn rollout(loaded: &LoadedScene, mut w: Option<&mut dyn Write>) -> Result<RolloutSummary> {
    let world = &loaded.world;
    let steps = world.steps();
    let mut state = loaded.state.clone();
    if let Some(w) = w.as_deref_mut() {
        writeln!(w, "t,body_id,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz")?;
        write_state_rows(w, loaded, &state)?;
    }
    let mut min_sep = f64::INFINITY;
    let mut times = Vec::with_capacity(steps);
    for k in 0..steps {
        let t0 = Instant::now();
        let report = step(&loaded.scene, &state, world.dt, world.integrator)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        min_sep = min_sep.min(report.min_separation);
        state = report.state;
        state.t = (k + 1) as f64 * world.dt;
        if let Some(w) = w.as_deref_mut() {
            write_state_rows(w, loaded, &state)?;
        }
    }
    min_sep = min_sep.min(evaluate_contacts(&loaded.scene, &state).min_separation());
    let (lo, hi) = times.iter().fold((f64::INFINITY, 0.0f64), |(l, h), t| (l.min(*t), h.max(*t)));
    let mean = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    Ok(RolloutSummary {
        steps,
        final_state: state,
        step_ms: if times.is_empty() { (0.0, 0.0, 0.0) } else { (lo, mean, hi) },
        max_penetration: if min_sep.is_finite() { -min_sep } else { f64::NEG_INFINITY },
    })
}

fn simulate(common: &Common, mut loaded: LoadedScene, duration: Option<f64>) -> Result<bool> {
    if let Some(d) = duration {
        loaded.world.duration = d;
        loaded.world.validate()?;
    }
    info!("simulating {} steps of {} s with {}", loaded.world.steps(), loaded.world.dt, loaded.world.integrator);
    let mut traj = create(common, &loaded.outputs.trajectory)?;
    let summary = rollout(&loaded, Some(&mut traj))?;
    traj.flush()?;
    let mut text = String::new();
    text.push_str(&format!("steps: {}\n", summary.steps));
    text.push_str(&format!("dt: {}\nintegrator: {}\n", loaded.world.dt, loaded.world.integrator));
    let (lo, mean, hi) = summary.step_ms;
    text.push_str(&format!("step wall time ms: min {lo:.4} mean {mean:.4} max {hi:.4}\n"));
    text.push_str(&format!("max penetration: {:e}\n", summary.max_penetration));
    for (k, b) in loaded.scene.free_bodies().enumerate() {
        let p = summary.final_state.poses[k];
        let (t, q) = (p.translation, p.orientation);
        text.push_str(&format!(
            "final {}: position [{}, {}, {}] orientation [{}, {}, {}, {}]\n",
            loaded.scene.bodies()[b].name,
            t.x,
            t.y,
            t.z,
            q.w,
            q.x,
            q.y,
            q.z
        ));
    }
    std::fs::write(common.out.join(&loaded.outputs.summary), &text)?;
    say(common, &text);
    Ok(true)
}

fn temperature_label(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

#[allow(clippy::too_many_arguments)]
fn sdf_grid(
    common: &Common,
    loaded: &LoadedScene,
    body: Option<&str>,
    lower: Option<[f64; 3]>,
    upper: Option<[f64; 3]>,
    resolution: [usize; 3],
    temperatures: &[f64],
    slice: Option<(usize, f64)>,
) -> Result<bool> {
    let b = match body {
        Some(name) => loaded.body_index(name)?,
        None => 0,
    };
    let aopc = &loaded.scene.bodies()[b].aopc;
    let c = aopc.centroid();
    let r = 1.5 * aopc.bounding_radius();
    let spec = GridSpec {
        lower: lower.unwrap_or([c.x - r, c.y - r, c.z - r]),
        upper: upper.unwrap_or([c.x + r, c.y + r, c.z + r]),
        resolution,
        slice,
    };
    spec.validate()?;
    let temperatures = if temperatures.is_empty() { vec![loaded.scene.params().eps1.value()] } else { temperatures.to_vec() };
    let mut text = String::new();
    for &t in &temperatures {
        let grid = sample_sdf_grid(aopc, &spec, Temperature::new(t)?)?;
        let name = format!("sdf_{}_eps{}.csv", loaded.scene.bodies()[b].name, temperature_label(t));
        let mut w = create(common, &name)?;
        grid.write_csv(&mut w)?;
        w.flush()?;
        let inside = grid.values.iter().filter(|v| **v < 0.0).count();
        text.push_str(&format!("{name}: {} nodes, {inside} inside\n", grid.values.len()));
    }
    say(common, &text);
    Ok(true)
}

/// One sample of a force sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSample {
    pub offset: f64,
    pub position: Vec3<f64>,
    pub force: Vec3<f64>,
    pub torque: Vec3<f64>,
    /// Derivative of `force` with respect to the offset.
    pub dforce: Vec3<f64>,
    pub soft_distance: f64,
}

/// Contact force on the free body `moving` at zero velocity, with its
/// position offset along `axis` from the loaded pose.
pub fn sweep(loaded: &LoadedScene, moving: usize, axis: Axis, offsets: &[f64]) -> Result<Vec<SweepSample>> {
    let scene = &loaded.scene;
    let o = scene.offset(moving).ok_or_else(|| Error::Config(format!("moving body '{}' must be free", scene.bodies()[moving].name)))?;
    let k = scene.free_bodies().position(|b| b == moving).expect("free body");
    let mut base = loaded.state.clone();
    base.v.iter_mut().for_each(|v| *v = 0.0);
    offsets
        .iter()
        .map(|&s| {
            let mut state = SceneState::<Dual>::lift(&base);
            let mut t = state.poses[k].translation;
            t[axis.index()] += Dual::new(s, 1.0);
            state.poses[k].translation = t;
            let ev = evaluate_contacts(scene, &state);
            let f = &ev.force.values;
            let pick = |a: usize, d: bool| Vec3::new(f[a].pick(d), f[a + 1].pick(d), f[a + 2].pick(d));
            Ok(SweepSample {
                offset: s,
                position: t.re(),
                force: pick(o, false),
                torque: pick(o + 3, false),
                dforce: pick(o, true),
                soft_distance: ev.soft_distances.iter().map(|d| d.re).fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

trait Pick {
    fn pick(&self, derivative: bool) -> f64;
}

impl Pick for Dual {
    fn pick(&self, derivative: bool) -> f64 {
        if derivative {
            self.du
        } else {
            self.re
        }
    }
}

fn force_sweep(common: &Common, loaded: &LoadedScene, moving: Option<&str>, axis: Axis, from: f64, to: f64, samples: usize) -> Result<bool> {
    if samples < 2 || !(from.is_finite() && to.is_finite() && from < to) {
        return Err(Error::Config("force sweep needs samples >= 2 and from < to".into()));
    }
    let m = match moving {
        Some(name) => loaded.body_index(name)?,
        None => 1.min(loaded.scene.bodies().len() - 1),
    };
    let offsets: Vec<f64> = (0..samples).map(|i| from + (to - from) * i as f64 / (samples - 1) as f64).collect();
    let rows = sweep(loaded, m, axis, &offsets)?;
    let mut w = create(common, "force_sweep.csv")?;
    writeln!(w, "offset,x,y,z,fx,fy,fz,mx,my,mz,dfx,dfy,dfz,soft_distance")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.offset,
            r.position.x,
            r.position.y,
            r.position.z,
            r.force.x,
            r.force.y,
            r.force.z,
            r.torque.x,
            r.torque.y,
            r.torque.z,
            r.dforce.x,
            r.dforce.y,
            r.dforce.z,
            r.soft_distance
        )?;
    }
    w.flush()?;
    let peak = rows.iter().map(|r| r.force.norm()).fold(0.0, f64::max);
    say(common, &format!("force_sweep.csv: {samples} samples, peak |f| {peak:e} N\n"));
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn collide(
    common: &Common,
    mut loaded: LoadedScene,
    pair: usize,
    swap: bool,
    k: Option<usize>,
    tau: Option<f64>,
    positions: &[(String, [f64; 3])],
) -> Result<bool> {
    for (name, p) in positions {
        let b = loaded.body_index(name)?;
        let Some(k) = loaded.scene.free_bodies().position(|f| f == b) else {
            return Err(Error::Config(format!("position override needs a free body, '{name}' is kinematic")));
        };
        let q = loaded.state.poses[k].orientation;
        loaded.state.poses[k] = Pose::new(Vec3::new(p[0], p[1], p[2]), q);
    }
    loaded.state.validate(&loaded.scene)?;
    let scene = &loaded.scene;
    let &(mut ia, mut ib) = scene.pairs().get(pair).ok_or_else(|| Error::Config(format!("pair {pair} does not exist")))?;
    if swap {
        std::mem::swap(&mut ia, &mut ib);
    }
    let world = crate::dynamics::posed_aopcs(scene, &loaded.state);
    let params = scene.params();
    let field = separation_field(&world[ia], &world[ib], params.eps1, params.eps2);
    let soft = soft_separation_distance(&field);
    let hard = hard_pipeline_oracle(scene, &loaded.state)?.swap_remove(pair);
    let names = [&scene.bodies()[ia].name, &scene.bodies()[ib].name];
    let mut w = create(common, "collision.csv")?;
    writeln!(w, "index,body,face,value,probability")?;
    for (i, (v, p)) in field.values().iter().zip(field.distribution()).enumerate() {
        let (side, face) = field.provenance(i);
        let body = if side == Side::First { names[0] } else { names[1] };
        writeln!(w, "{i},{body},{face},{v},{p:e}")?;
    }
    w.flush()?;
    let mut text = format!(
        "pair: {} / {}\nsoft separation distance: {soft}\nhard separation distance: {}\nfield entries: {}\n",
        names[0],
        names[1],
        hard.distance,
        field.len()
    );
    if let Some(k) = k {
        let z = crate::collision::vertex_weights(&field, &world[ia], &world[ib])?;
        let spread = z.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v)) - z.iter().fold(f64::INFINITY, |a, v| a.min(*v));
        let tau = Temperature::new(tau.unwrap_or(1e-3 * spread.max(f64::MIN_POSITIVE)))?;
        let set = contact_points(&world[ia], &world[ib], &field, k, tau)?;
        let mut w = create(common, "contacts.csv")?;
        writeln!(w, "k,x,y,z")?;
        for (r, p) in set.points.iter().enumerate() {
            writeln!(w, "{r},{},{},{}", p.x, p.y, p.z)?;
        }
        w.flush()?;
        text.push_str(&format!("contact points: {k} (tau {:e})\n", tau.value()));
    }
    say(common, &text);
    Ok(true)
}

/// Gradient checks at `samples` seeded random states around the loaded one.
pub fn gradcheck_report(loaded: &LoadedScene, seed: u64, samples: usize, h: f64, tol: f64) -> Result<GradCheckReport> {
    if samples == 0 {
        return Err(Error::Config("gradcheck needs samples >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<SceneState<f64>> = (0..samples).map(|_| random_state(&loaded.state, &Jitter::default(), &mut rng)).collect();
    let reports = states
        .iter()
        .map(|s| check_pipeline_gradients(&loaded.scene, s, h, tol))
        .collect::<Result<Vec<_>>>()?;
    GradCheckReport::merge(reports)
}

fn gradcheck(common: &Common, loaded: &LoadedScene, samples: usize, h: f64, tol: f64) -> Result<bool> {
    let report = gradcheck_report(loaded, common.seed, samples, h, tol)?;
    let mut text = Vec::new();
    report.write_text(&mut text)?;
    std::fs::write(common.out.join("gradcheck.txt"), &text)?;
    let mut w = create(common, "gradcheck.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    say(common, &String::from_utf8_lossy(&text));
    Ok(report.passed())
}

/// Median and 10th/90th percentile of single-step wall times (ms).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepTiming {
    pub points: usize,
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] * (1.0 - f) + sorted[j] * f
}

/// Time `repetitions` steps taken from the same state.
pub fn time_steps(loaded: &LoadedScene, state: &SceneState<f64>, repetitions: usize) -> Result<StepTiming> {
    let mut times = Vec::with_capacity(repetitions);
    step(&loaded.scene, state, loaded.world.dt, loaded.world.integrator)?;
    for _ in 0..repetitions {
        let t0 = Instant::now();
        let r = step(&loaded.scene, state, loaded.world.dt, loaded.world.integrator)?;
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(r);
    }
    times.sort_by(f64::total_cmp);
    let points = loaded.scene.bodies().iter().map(|b| b.aopc.len()).sum();
    Ok(StepTiming { points, median_ms: percentile(&times, 0.5), p10_ms: percentile(&times, 0.1), p90_ms: percentile(&times, 0.9) })
}

/// The loaded state with every free body moved far from all others.
pub fn separated_state(loaded: &LoadedScene) -> SceneState<f64> {
    let scene = &loaded.scene;
    let reach: f64 = scene.bodies().iter().map(|b| b.aopc.bounding_radius() + b.aopc.centroid().norm()).sum();
    let spacing = 4.0 * reach + 1.0;
    let mut state = loaded.state.clone();
    for (k, p) in state.poses.iter_mut().enumerate() {
        let d = spacing * (k + 1) as f64;
        p.translation += Vec3::new(d, d, d);
    }
    state
}

fn bench(common: &Common, repetitions: usize, resolutions: &[usize]) -> Result<bool> {
    if repetitions < 10 {
        return Err(Error::Config("bench needs repetitions >= 10".into()));
    }
    let cfg = load_config(common)?;
    let base = base_dir(common);
    let resolutions: Vec<Option<usize>> = if resolutions.is_empty() { vec![None] } else { resolutions.iter().map(|r| Some(*r)).collect() };
    let mut w = create(common, "bench.csv")?;
    writeln!(w, "variant,resolution,points,repetitions,median_ms,p10_ms,p90_ms")?;
    let mut text = String::new();
    for res in resolutions {
        let loaded = cfg.build(&base, res)?;
        let label = res.map_or("config".to_string(), |r| r.to_string());
        let contact = time_steps(&loaded, &loaded.state, repetitions)?;
        let apart = time_steps(&loaded, &separated_state(&loaded), repetitions)?;
        for (variant, t) in [("contact", contact), ("separated", apart)] {
            writeln!(w, "{variant},{label},{},{repetitions},{},{},{}", t.points, t.median_ms, t.p10_ms, t.p90_ms)?;
        }
        text.push_str(&format!(
            "resolution {label} ({} points): contact {:.4} ms, separated {:.4} ms, ratio {:.3}\n",
            contact.points,
            contact.median_ms,
            apart.median_ms,
            contact.median_ms / apart.median_ms
        ));
    }
    w.flush()?;
    text.push_str("step time scales with the point count on a CPU; the ratio measures independence from the number of contacts\n");
    say(common, &text);
    Ok(true)
}
