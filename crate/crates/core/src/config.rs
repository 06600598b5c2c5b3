//! TOML scene description.
//!
//! Free bodies are re-centered so that their frame sits at the center of
//! mass; `position` is then the world position of the center of mass.
//! Kinematic bodies keep the frame their shape is defined in.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::contact::ContactParams;
use crate::dynamics::{Body, BodyKind, Controls, CubicSpline, Integrator, Scene, SceneState, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{generate_primitive, import_aopc, t_shape, BoxMember, LocalAopc, Pose, Primitive};
use crate::linalg::{Mat3, Quat, Vec3};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub contact: ContactParams,
    pub bodies: Vec<BodyConfig>,
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub gravity: [f64; 3],
    pub dt: f64,
    pub integrator: Integrator,
    pub duration: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { gravity: [0.0, 0.0, -9.81], dt: 1e-3, integrator: Integrator::Rk4, duration: 1.0 }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(config_err("world.gravity must be finite"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(config_err(format!("world.dt must be > 0, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(config_err(format!("world.duration must be >= 0, got {}", self.duration)));
        }
        Ok(())
    }

    /// Number of steps covering `duration`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Output file names, relative to the output directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub trajectory: String,
    pub summary: String,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self { trajectory: "trajectory.csv".into(), summary: "summary.txt".into() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindConfig {
    #[default]
    Free,
    Kinematic,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub name: String,
    #[serde(default)]
    pub kind: KindConfig,
    pub shape: ShapeConfig,
    /// Target point count for generated shapes.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    pub mass: Option<f64>,
    /// Body-frame inertia about the center of mass; derived from the shape if absent.
    pub inertia: Option<[[f64; 3]; 3]>,
    #[serde(default)]
    pub position: [f64; 3],
    /// Unit quaternion `[w, x, y, z]`.
    #[serde(default = "identity_quat")]
    pub orientation: [f64; 4],
    #[serde(default)]
    pub linear_velocity: [f64; 3],
    #[serde(default)]
    pub angular_velocity: [f64; 3],
    pub trajectory: Option<TrajectoryConfig>,
}

fn default_resolution() -> usize {
    600
}

fn identity_quat() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Sphere { radius: f64 },
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
    Composite { members: Vec<MemberConfig> },
    /// Crossbar at the origin with the stem hanging along −y.
    TShape { bar: [f64; 3], stem: [f64; 3] },
    /// AOPC text file, relative to the config file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub size: [f64; 3],
    #[serde(default)]
    pub center: [f64; 3],
}

/// Prescribed motion; the body's `position`/`orientation` give the start pose.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    Static,
    Linear { velocity: [f64; 3] },
    /// Clamped cubic through `waypoints` at `times`.
    Spline { times: Vec<f64>, waypoints: Vec<[f64; 3]> },
}

impl ShapeConfig {
    pub fn primitive(&self) -> Option<Primitive> {
        match self {
            ShapeConfig::Sphere { radius } => Some(Primitive::Sphere { radius: *radius }),
            ShapeConfig::Box { size } => Some(Primitive::Box { size: *size }),
            ShapeConfig::Cylinder { radius, height } => Some(Primitive::Cylinder { radius: *radius, height: *height }),
            ShapeConfig::Composite { members } => Some(Primitive::Composite {
                members: members.iter().map(|m| BoxMember { size: m.size, center: m.center }).collect(),
            }),
            ShapeConfig::TShape { bar, stem } => Some(t_shape(*bar, *stem)),
            ShapeConfig::File { .. } => None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// A scene ready to simulate, plus the world settings it was built with.
#[derive(Clone, Debug)]
pub struct LoadedScene {
    pub scene: Scene,
    pub state: SceneState<f64>,
    pub world: WorldConfig,
    pub outputs: OutputsConfig,
}

impl LoadedScene {
    pub fn body_index(&self, name: &str) -> Result<usize> {
        self.scene
            .bodies()
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| config_err(format!("unknown body '{name}'")))
    }
}

impl SceneConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Build the scene, resolving shape files against `base_dir`.
    /// `resolution` overrides every generated shape's point count.
    pub fn build(&self, base_dir: &Path, resolution: Option<usize>) -> Result<LoadedScene> {
        self.world.validate()?;
        self.contact.validate()?;
        if self.bodies.is_empty() {
            return Err(config_err("at least one body is required"));
        }
        let mut bodies = Vec::with_capacity(self.bodies.len());
        let mut poses = Vec::new();
        let mut v = Vec::new();
        for (k, b) in self.bodies.iter().enumerate() {
            if b.name.is_empty() || b.name.contains(char::is_whitespace) {
                return Err(config_err(format!("bodies[{k}].name must be non-empty without whitespace")));
            }
            if self.bodies[..k].iter().any(|o| o.name == b.name) {
                return Err(config_err(format!("duplicate body name '{}'", b.name)));
            }
            let (body, pose) = build_body(b, base_dir, resolution).map_err(|e| match e {
                Error::Config(m) | Error::InvalidArgument(m) => config_err(format!("body '{}': {m}", b.name)),
                other => other,
            })?;
            if let Some(pose) = pose {
                poses.push(pose);
                v.extend_from_slice(&b.linear_velocity);
                v.extend_from_slice(&b.angular_velocity);
            }
            bodies.push(body);
        }
        let index = |n: &str| {
            self.bodies
                .iter()
                .position(|b| b.name == n)
                .ok_or_else(|| config_err(format!("pair references unknown body '{n}'")))
        };
        let pairs = self
            .pairs
            .iter()
            .map(|[a, b]| Ok((index(a)?, index(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let g = self.world.gravity;
        let scene = Scene::new(bodies, pairs, Vec3::new(g[0], g[1], g[2]), self.contact, Controls::Zero)
            .map_err(|e| config_err(e.to_string()))?;
        let state = SceneState { t: 0.0, poses, v };
        state.validate(&scene).map_err(|e| config_err(e.to_string()))?;
        Ok(LoadedScene { scene, state, world: self.world.clone(), outputs: self.outputs.clone() })
    }
}

fn vec3(a: [f64; 3]) -> Vec3<f64> {
    Vec3::new(a[0], a[1], a[2])
}

fn build_body(b: &BodyConfig, base_dir: &Path, resolution: Option<usize>) -> Result<(Body, Option<Pose<f64>>)> {
    if [b.position, b.linear_velocity, b.angular_velocity].iter().flatten().any(|x| !x.is_finite()) {
        return Err(config_err("position and velocities must be finite"));
    }
    let [w, x, y, z] = b.orientation;
    let q = Quat::new(w, x, y, z);
    if !(q.is_finite() && (q.norm_squared().sqrt() - 1.0).abs() <= 1e-6) {
        return Err(config_err("orientation must be a unit quaternion [w, x, y, z]"));
    }
    let pose = Pose::new(vec3(b.position), q.normalized());
    let resolution = resolution.unwrap_or(b.resolution);
    match b.kind {
        KindConfig::Free => {
            if b.trajectory.is_some() {
                return Err(config_err("free bodies take no trajectory"));
            }
            let mass = b.mass.ok_or_else(|| config_err("free bodies need a mass"))?;
            let (aopc, derived) = match b.shape.primitive() {
                Some(prim) => {
                    let (centered, _) = prim.centered()?;
                    let mp = centered.mass_properties(mass)?;
                    (generate_primitive(&centered, resolution)?, Some(mp.inertia))
                }
                None => (load_file(&b.shape, base_dir)?, None),
            };
            let inertia = match (b.inertia, derived) {
                (Some(m), _) => Mat3::from_rows(m),
                (None, Some(i)) => i,
                (None, None) => return Err(config_err("shapes loaded from files need an explicit inertia")),
            };
            let aopc = aopc.with_name(b.name.clone())?;
            Ok((Body { name: b.name.clone(), aopc, kind: BodyKind::Free { mass, inertia } }, Some(pose)))
        }
        KindConfig::Kinematic => {
            if b.mass.is_some() || b.inertia.is_some() {
                return Err(config_err("kinematic bodies take no mass or inertia"));
            }
            if b.linear_velocity != [0.0; 3] || b.angular_velocity != [0.0; 3] {
                return Err(config_err("kinematic bodies take their velocity from the trajectory"));
            }
            let aopc = match b.shape.primitive() {
                Some(prim) => generate_primitive(&prim, resolution)?,
                None => load_file(&b.shape, base_dir)?,
            }
            .with_name(b.name.clone())?;
            let trajectory = match b.trajectory.as_ref().unwrap_or(&TrajectoryConfig::Static) {
                TrajectoryConfig::Static => Trajectory::Static(pose),
                TrajectoryConfig::Linear { velocity } => {
                    if velocity.iter().any(|x| !x.is_finite()) {
                        return Err(config_err("trajectory velocity must be finite"));
                    }
                    Trajectory::Linear { start: pose, velocity: vec3(*velocity) }
                }
                TrajectoryConfig::Spline { times, waypoints } => Trajectory::Spline(CubicSpline::new(
                    times.clone(),
                    waypoints.iter().map(|w| vec3(*w)).collect(),
                    pose.orientation,
                )?),
            };
            Ok((Body { name: b.name.clone(), aopc, kind: BodyKind::Kinematic(trajectory) }, None))
        }
    }
}

fn load_file(shape: &ShapeConfig, base_dir: &Path) -> Result<LocalAopc> {
    let ShapeConfig::File { path } = shape else {
        unreachable!("only file shapes lack a primitive")
    };
    let full = base_dir.join(path);
    let text = std::fs::read_to_string(&full).map_err(|e| config_err(format!("cannot read {}: {e}", full.display())))?;
    import_aopc(&text).map_err(|e| config_err(format!("{}: {e}", full.display())))
}
