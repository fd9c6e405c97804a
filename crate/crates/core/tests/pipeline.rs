use std::fs::{self, File};

use myo_core::datastore::{raw_path, read_raw_stream, read_session_file};
use myo_core::decoder::TrainConfig;
use myo_core::dsp::FilterVariant;
use myo_core::runtime::{
    decode_offline, record_training_session, run_pipeline, train_on_session, ExecutionMode,
    PipelineConfig, Source,
};
use myo_core::synthemg::{make_profile, MovementSchedule, SynergyModel, DOF_LABELS};

fn schedule() -> MovementSchedule {
    MovementSchedule {
        movements: DOF_LABELS.iter().map(|s| s.to_string()).collect(),
        rise_s: 0.2,
        hold_s: 0.5,
        rest_s: 0.3,
        repetitions: 2,
    }
}

#[test]
fn fixed_seed_gives_byte_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let profile = make_profile(&schedule()).unwrap();
    let synergy = SynergyModel::forearm_default();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        record_training_session(
            &profile,
            &synergy,
            FilterVariant::ResearchGrade,
            31,
            Some(p),
        )
        .unwrap();
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    assert_eq!(
        fs::read(raw_path(&paths[0])).unwrap(),
        fs::read(raw_path(&paths[1])).unwrap()
    );

    let log = read_session_file(&paths[0]).unwrap();
    assert_eq!(log.meta.seed, 31);
    assert_eq!(log.meta.filter, FilterVariant::ResearchGrade);
    let mut labels: Vec<_> = log.rows.iter().map(|r| r.label.clone()).collect();
    labels.sort();
    labels.dedup();
    let mut expected: Vec<String> = DOF_LABELS.iter().map(|s| s.to_string()).collect();
    expected.push("rest".into());
    expected.sort();
    assert_eq!(labels, expected);
}

#[test]
fn unwritable_destination_fails_early() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("s.csv");
    let profile = make_profile(&schedule()).unwrap();
    let r = record_training_session(
        &profile,
        &SynergyModel::forearm_default(),
        FilterVariant::LowCost,
        1,
        Some(&bad),
    );
    assert!(matches!(r, Err(myo_core::Error::Io(_))));
}

#[test]
fn replay_from_raw_sidecar_matches_batch_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let profile = make_profile(&schedule()).unwrap();
    let (log, samples) = record_training_session(
        &profile,
        &SynergyModel::forearm_default(),
        FilterVariant::LowCost,
        8,
        Some(&path),
    )
    .unwrap();
    let model = train_on_session(&log.labeled(), &TrainConfig::default()).unwrap();
    let replayed = read_raw_stream(File::open(raw_path(&path)).unwrap()).unwrap();
    assert_eq!(replayed, samples);

    let batch = decode_offline(&replayed, FilterVariant::LowCost, &model).unwrap();
    let duration = replayed.len() as u64;
    let mut traces = Vec::new();
    for mode in [
        ExecutionMode::Deterministic,
        ExecutionMode::Deterministic,
        ExecutionMode::Threaded { paced: false },
    ] {
        let cfg = PipelineConfig::new(
            Source::Replay(replayed.clone()),
            FilterVariant::LowCost,
            model.clone(),
        )
        .with_mode(mode);
        let (trace, timing) = run_pipeline(cfg, duration).unwrap();
        assert_eq!(timing.cycles(), (duration / 40) as usize);
        assert_eq!(timing.dropped_sample_count, 0);
        traces.push(trace);
    }
    assert!(traces.iter().all(|t| *t == batch));
}

#[test]
fn synthetic_source_matches_replay() {
    let profile = make_profile(&schedule()).unwrap();
    let synergy = SynergyModel::forearm_default();
    let (log, samples) =
        record_training_session(&profile, &synergy, FilterVariant::LowCost, 4, None).unwrap();
    let model = train_on_session(&log.labeled(), &TrainConfig::default()).unwrap();
    let synth = Source::Synthetic {
        profile,
        synergy,
        seed: 4,
    };
    let (a, _) = run_pipeline(
        PipelineConfig::new(synth, FilterVariant::LowCost, model.clone()),
        4_000,
    )
    .unwrap();
    let (b, _) = run_pipeline(
        PipelineConfig::new(Source::Replay(samples), FilterVariant::LowCost, model),
        4_000,
    )
    .unwrap();
    assert_eq!(a.len(), 100);
    assert_eq!(a, b);
}
