mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roboplat_core::dataset::{open_session, parse_line, read_session, write_line, SensorKind, Stream};

fn kind() -> impl Strategy<Value = SensorKind> {
    proptest::sample::select(SensorKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn parse_inverts_write(seed: u64, kind in kind()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = common::records::record(&mut rng, kind);
        let line = write_line(&r);
        prop_assert!(!line.contains('\n'));
        let back = parse_line(&line, kind).unwrap();
        prop_assert_eq!(write_line(&back), line);
        prop_assert_eq!(back, r);
    }

    #[test]
    fn session_files_round_trip(seed: u64, n in 0usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("s");
        let mut w = open_session(&root, &[Stream::GnssMeas]).unwrap();
        let rows: Vec<_> = (0..n).map(|_| common::records::record(&mut rng, SensorKind::GnssMeas)).collect();
        for r in &rows {
            w.append(&Stream::GnssMeas, r).unwrap();
        }
        w.finish().unwrap();
        let back = read_session(&root).unwrap().records(&Stream::GnssMeas).unwrap();
        prop_assert_eq!(back, rows);
    }
}
