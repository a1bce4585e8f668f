//! Dataset generation and loading.
//!
//! Layout: `frames/NNNNNN.png`, `sensors.jsonl`, `truth.jsonl`, and a
//! `scenario.toml` copy. Fully reproducible from the scenario seed.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    io_err, sample_sensors, step_controller, FishField, ScenarioConfig, SensorFrame, SimError,
};
use crate::image::save_png;
use crate::scalar::Real;

/// One line of `sensors.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub t: f64,
    /// `[port, starboard, up, down]`.
    pub dvl_beams: [f64; 4],
    pub dvl_vx: f64,
    pub dvl_vy: f64,
    pub echo_range: f64,
    pub pressure_depth: f64,
    pub imu_yaw: f64,
}

/// One line of `truth.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    pub psi: f64,
    pub distance: f64,
    pub yaw_rel: f64,
    pub pitch_rel: f64,
}

impl SensorRecord {
    fn from_frame<R: Real>(frame: &SensorFrame<R>) -> Self {
        Self {
            t: frame.t.as_f64(),
            dvl_beams: [
                frame.dvl_beams[0].as_f64(),
                frame.dvl_beams[1].as_f64(),
                frame.dvl_beams[2].as_f64(),
                frame.dvl_beams[3].as_f64(),
            ],
            dvl_vx: frame.dvl_velocity.vx.as_f64(),
            dvl_vy: frame.dvl_velocity.vy.as_f64(),
            echo_range: frame.echo_range.as_f64(),
            pressure_depth: frame.pressure_depth.as_f64(),
            imu_yaw: frame.imu_yaw.as_f64(),
        }
    }
}

impl TruthRecord {
    fn from_frame<R: Real>(frame: &SensorFrame<R>) -> Self {
        Self {
            t: frame.t.as_f64(),
            r: frame.truth_global.r.as_f64(),
            theta: frame.truth_global.theta.as_f64(),
            z: frame.truth_global.z.as_f64(),
            psi: frame.truth_global.psi.as_f64(),
            distance: frame.truth_relative.distance.as_f64(),
            yaw_rel: frame.truth_relative.yaw_rel.as_f64(),
            pitch_rel: frame.truth_relative.pitch_rel.as_f64(),
        }
    }
}

/// One loaded dataset frame: image path plus its sensor and truth rows.
#[derive(Debug, Clone)]
pub struct DatasetFrame {
    pub index: usize,
    pub png_path: PathBuf,
    pub sensors: SensorRecord,
    pub truth: TruthRecord,
}

/// A dataset directory opened for processing; images stay on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub frames: Vec<DatasetFrame>,
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), SimError> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SimError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| SimError::Dataset {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", idx + 1),
        })?);
    }
    Ok(rows)
}

/// Run the scenario end to end and write the dataset. Datasets generated
/// twice from the same scenario are byte-identical.
pub fn generate_dataset(scenario: &ScenarioConfig, out_dir: &Path) -> Result<Dataset, SimError> {
    let world = scenario.world::<f64>()?;
    let k = scenario.intrinsics::<f64>()?;
    let noise = scenario.sensor_noise::<f64>()?;
    let ctrl = scenario.controller::<f64>();
    let dt = scenario.sim.dt;
    if dt <= 0.0 {
        return Err(SimError::InvalidConfig("sim.dt must be positive".into()));
    }

    let frames_dir = out_dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;

    // Fish layout and frame noise use decoupled streams of the same seed.
    let mut fish_rng = ChaCha8Rng::seed_from_u64(scenario.sim.seed ^ 0x66697368);
    let fish = FishField::<f64>::generate(
        scenario.fish.count as usize,
        world.pen_radius,
        scenario.trajectory.start_theta_deg.to_radians(),
        scenario.trajectory.start_depth,
        scenario.fish.mean_half_length,
        scenario.fish.mean_speed,
        &mut fish_rng,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.sim.seed);

    let mut state = world.outward_pose(
        scenario.trajectory.start_distance,
        scenario.trajectory.start_theta_deg.to_radians(),
        scenario.trajectory.start_depth,
        0.0,
    );

    let mut sensors = Vec::new();
    let mut truths = Vec::new();
    let mut frames = Vec::new();
    let mut index = 0usize;
    for segment in &scenario.trajectory.segments {
        let n = (segment.duration / dt).round() as usize;
        for _ in 0..n {
            let (next, vel) = step_controller(
                &world,
                &state,
                segment.distance,
                segment.speed,
                segment.depth,
                &ctrl,
                dt,
            )?;
            let frame = sample_sensors(&world, &fish, &state, &vel, &noise, &k, &mut rng)?;
            let png_path = frames_dir.join(format!("{index:06}.png"));
            save_png(&frame.rgb, &png_path)?;
            sensors.push(SensorRecord::from_frame(&frame));
            truths.push(TruthRecord::from_frame(&frame));
            frames.push(DatasetFrame {
                index,
                png_path,
                sensors: sensors.last().unwrap().clone(),
                truth: truths.last().unwrap().clone(),
            });
            state = next;
            index += 1;
        }
    }

    write_jsonl(&out_dir.join("sensors.jsonl"), &sensors)?;
    write_jsonl(&out_dir.join("truth.jsonl"), &truths)?;
    scenario.save(&out_dir.join("scenario.toml"))?;
    Ok(Dataset {
        dir: out_dir.to_path_buf(),
        scenario: scenario.clone(),
        frames,
    })
}

/// Open and validate a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset, SimError> {
    let scenario_path = dir.join("scenario.toml");
    if !scenario_path.exists() {
        return Err(SimError::Dataset {
            path: dir.to_path_buf(),
            reason: "missing scenario.toml".into(),
        });
    }
    let scenario = ScenarioConfig::load(&scenario_path)?;
    let sensors: Vec<SensorRecord> = read_jsonl(&dir.join("sensors.jsonl"))?;
    let truths: Vec<TruthRecord> = read_jsonl(&dir.join("truth.jsonl"))?;
    if sensors.is_empty() {
        return Err(SimError::Dataset {
            path: dir.to_path_buf(),
            reason: "dataset has no frames".into(),
        });
    }
    if sensors.len() != truths.len() {
        return Err(SimError::Dataset {
            path: dir.to_path_buf(),
            reason: format!(
                "{} sensor records vs {} truth records",
                sensors.len(),
                truths.len()
            ),
        });
    }
    let mut frames = Vec::with_capacity(sensors.len());
    for (index, (sensors, truth)) in sensors.into_iter().zip(truths).enumerate() {
        let png_path = dir.join("frames").join(format!("{index:06}.png"));
        if !png_path.exists() {
            return Err(SimError::Dataset {
                path: png_path,
                reason: "missing frame image".into(),
            });
        }
        frames.push(DatasetFrame {
            index,
            png_path,
            sensors,
            truth,
        });
    }
    Ok(Dataset {
        dir: dir.to_path_buf(),
        scenario,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small, fast scenario for tests.
    fn tiny_scenario() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.camera.width = 64;
        cfg.camera.height = 48;
        cfg.camera.cx = 32.0;
        cfg.camera.cy = 24.0;
        cfg.trajectory.segments = vec![super::super::SegmentConfig {
            distance: 1.0,
            speed: 0.2,
            depth: 5.0,
            duration: 1.0,
        }];
        cfg
    }

    #[test]
    fn generates_expected_cardinality() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_scenario();
        let dataset = generate_dataset(&cfg, dir.path()).unwrap();
        assert_eq!(dataset.frames.len(), 10);
        for i in 0..10 {
            assert!(dir.path().join(format!("frames/{i:06}.png")).exists());
        }
        assert!(dir.path().join("sensors.jsonl").exists());
        assert!(dir.path().join("truth.jsonl").exists());
        assert!(dir.path().join("scenario.toml").exists());
    }

    #[test]
    fn same_seed_gives_byte_identical_datasets() {
        let cfg = tiny_scenario();
        let da = tempfile::tempdir().unwrap();
        let db = tempfile::tempdir().unwrap();
        generate_dataset(&cfg, da.path()).unwrap();
        generate_dataset(&cfg, db.path()).unwrap();
        for name in ["sensors.jsonl", "truth.jsonl", "scenario.toml"] {
            assert_eq!(
                std::fs::read(da.path().join(name)).unwrap(),
                std::fs::read(db.path().join(name)).unwrap(),
                "{name} differs"
            );
        }
        for i in 0..10 {
            let name = format!("frames/{i:06}.png");
            assert_eq!(
                std::fs::read(da.path().join(&name)).unwrap(),
                std::fs::read(db.path().join(&name)).unwrap(),
                "{name} differs"
            );
        }
    }

    #[test]
    fn load_round_trips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_scenario();
        generate_dataset(&cfg, dir.path()).unwrap();
        let dataset = load_dataset(dir.path()).unwrap();
        assert_eq!(dataset.frames.len(), 10);
        assert_eq!(dataset.scenario, cfg);
        // Truth is consistent with the scenario start.
        let first = &dataset.frames[0].truth;
        assert!((first.r - 24.0).abs() < 1e-9);
        assert!((first.distance - 1.0).abs() < 1e-9);

        // Remove a frame: loading must fail with a dataset error.
        std::fs::remove_file(dir.path().join("frames/000003.png")).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(SimError::Dataset { .. })
        ));
    }

    #[test]
    fn missing_directory_is_a_dataset_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_dataset(&dir.path().join("nope")),
            Err(SimError::Dataset { .. })
        ));
    }
}
