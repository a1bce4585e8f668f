use netpen_cli::{run_pipeline, PipelineConfig};
use netpen_core::simpen::{generate_dataset, ScenarioConfig, SegmentConfig};

fn main() {
    let dir = std::env::temp_dir().join("netpen-repro3");
    let _ = std::fs::remove_dir_all(&dir);
    let mut scenario = ScenarioConfig::default();
    scenario.camera.width = 256;
    scenario.camera.height = 192;
    scenario.camera.cx = 128.0;
    scenario.camera.cy = 96.0;
    scenario.trajectory.segments = vec![SegmentConfig { distance: 1.0, speed: 0.2, depth: 5.0, duration: 2.0 }];
    generate_dataset(&scenario, &dir.join("data")).unwrap();
    let mut config = PipelineConfig::default();
    config.fft.patch_size = 64;
    config.fft.patch_stride = 64;
    config.fft.max_period_px = 30.0;
    config.map.ray_stride = 12;

    // Concurrent runs on several threads, like the test harness.
    let handles: Vec<_> = (0..6)
        .map(|i| {
            let dir = dir.clone();
            let config = config.clone();
            std::thread::spawn(move || {
                let report =
                    run_pipeline(&dir.join("data"), &config, &dir.join(format!("out{i}"))).unwrap();
                report
                    .frames
                    .iter()
                    .map(|f| f.distance_fft.unwrap().to_bits())
                    .collect::<Vec<u64>>()
            })
        })
        .collect();
    let results: Vec<Vec<u64>> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for (i, r) in results.iter().enumerate() {
        if *r != results[0] {
            println!("thread {i} DIFFERS from thread 0");
            for (j, (a, b)) in results[0].iter().zip(r).enumerate() {
                if a != b {
                    println!("  frame {j}: {a:x} vs {b:x}");
                }
            }
        }
    }
    println!("done: {} threads compared", results.len());
}
