use myo_core::datastore::{
    read_session, read_session_file, storage_estimate, write_session, write_session_file,
    SessionLog, SessionMeta, SessionRow, COLUMNS, WORST_ROW_BYTES,
};
use myo_core::dsp::FilterVariant;
use myo_core::Error;
use proptest::prelude::*;

const FIXTURE: &str = include_str!("fixtures/session_small.csv");

#[test]
fn fixture_reads_and_rewrites_byte_exact() {
    let log = read_session(FIXTURE.as_bytes()).unwrap();
    assert_eq!(log.len(), 3);
    assert_eq!(log.rows[1].label, "D1-flex/ext");
    assert_eq!(log.rows[2].raw[1], 1023);
    assert_eq!(log.rows[2].kin[5], -0.1);
    assert_eq!(log.rest_mask(), vec![true, false, false]);
    let mut out = Vec::new();
    write_session(&log, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), FIXTURE);
}

#[test]
fn file_round_trip_keeps_meta() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let mut log = read_session(FIXTURE.as_bytes()).unwrap();
    log.meta = SessionMeta {
        session_id: "fixture".into(),
        seed: 7,
        filter: FilterVariant::ResearchGrade,
        ..SessionMeta::default()
    };
    let bytes = write_session_file(&log, &path).unwrap();
    assert_eq!(bytes, FIXTURE.len() as u64);
    assert_eq!(read_session_file(&path).unwrap(), log);
}

#[test]
fn header_must_match() {
    let bad = FIXTURE.replacen("kin5,label", "kin5,tag", 1);
    assert!(matches!(
        read_session(bad.as_bytes()),
        Err(Error::Parse { line: 1, .. })
    ));
    assert!(read_session(&b""[..]).is_err());
}

#[test]
fn ten_minute_estimate_within_budget() {
    let ten = storage_estimate(10.0);
    assert!(ten as f64 / 10.0 <= 32e9 / 108_000.0);
    assert_eq!(WORST_ROW_BYTES, 194);
}

#[derive(Debug, Clone)]
enum Mutation {
    DropColumn(usize),
    ExtraColumn,
    Nan(usize),
    RawTooHigh(usize),
    NegativeMav(usize),
    KinTooLarge(usize),
    BadLabel,
    Gap,
}

fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        (0..COLUMNS).prop_map(Mutation::DropColumn),
        Just(Mutation::ExtraColumn),
        (1..COLUMNS - 1).prop_map(Mutation::Nan),
        (1usize..7).prop_map(Mutation::RawTooHigh),
        (7usize..28).prop_map(Mutation::NegativeMav),
        (28usize..34).prop_map(Mutation::KinTooLarge),
        Just(Mutation::BadLabel),
        Just(Mutation::Gap),
    ]
}

fn apply(line: &str, m: &Mutation) -> String {
    let mut f: Vec<String> = line.split(',').map(String::from).collect();
    match *m {
        Mutation::DropColumn(c) => {
            f.remove(c);
        }
        Mutation::ExtraColumn => f.push("0".into()),
        Mutation::Nan(c) => f[c] = "NaN".into(),
        Mutation::RawTooHigh(c) => f[c] = "1024".into(),
        Mutation::NegativeMav(c) => f[c] = "-1".into(),
        Mutation::KinTooLarge(c) => f[c] = "1.01".into(),
        Mutation::BadLabel => f[COLUMNS - 1] = "D9-flex".into(),
        Mutation::Gap => {
            let t: u64 = f[0].parse().unwrap();
            f[0] = (t + 1).to_string();
        }
    }
    f.join(",")
}

fn arb_row(t_ms: u64) -> impl Strategy<Value = SessionRow> {
    (
        prop::array::uniform6(0u16..=1023),
        prop::collection::vec(0u32..10_000, 21),
        prop::array::uniform6(-100i32..=100),
        prop::sample::select(vec!["rest", "D1-flex/ext", "D3-ext", "D1-abd"]),
    )
        .prop_map(move |(raw, mav, kin, label)| SessionRow {
            t_ms,
            raw,
            mav: std::array::from_fn(|i| mav[i] as f64),
            kin: kin.map(|k| k as f64 / 100.0),
            label: label.to_string(),
        })
}

proptest! {
    #[test]
    fn valid_rows_round_trip(rows in (1usize..20).prop_flat_map(|n| {
        (0..n).map(|i| arb_row(40 * (i as u64 + 1))).collect::<Vec<_>>()
    })) {
        let log = SessionLog { meta: SessionMeta::default(), rows };
        let mut buf = Vec::new();
        write_session(&log, &mut buf).unwrap();
        prop_assert_eq!(read_session(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn forbidden_mutations_are_rejected_with_their_line(
        target in 0usize..3,
        m in mutation(),
    ) {
        let mut lines: Vec<String> = FIXTURE.lines().map(String::from).collect();
        let line_no = target + 2;
        lines[target + 1] = apply(&lines[target + 1], &m);
        let text = lines.join("\n") + "\n";
        match read_session(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => {
                // a shifted timestamp breaks the step into the next row as well
                prop_assert!(line == line_no || (matches!(m, Mutation::Gap) && line == line_no + 1),
                    "{:?} reported at line {}", m, line);
            }
            other => prop_assert!(false, "{:?} accepted: {:?}", m, other),
        }
    }
}
