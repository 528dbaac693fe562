use proptest::prelude::*;
use tandem_cli::results::{parse_csv, ResultRow, ResultTable};
use tandem_cli::{tpf, Dataset};
use tandem_core::scoring::Confusion;
use tandem_core::{AlignmentResult, FrontEnd, Matrix};

proptest! {
    #[test]
    fn tpf_round_trips_f32_values(
        rows in 0usize..12,
        cols in 1usize..40,
        seed in proptest::collection::vec(-1.0e6f32..1.0e6, 480),
    ) {
        let data: Vec<f64> = seed[..rows * cols].iter().map(|&x| f64::from(x)).collect();
        let m = Matrix::from_vec(rows, cols, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tpf");
        tpf::write(&path, &m).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        prop_assert_eq!(bytes.len(), 12 + 4 * rows * cols);
        prop_assert_eq!(tpf::read(&path).unwrap(), m);
    }

    #[test]
    fn csv_reparse_matches_table(cells in proptest::collection::vec((0usize..5, 0.0f64..100.0, -50.0f64..100.0), 1..20)) {
        let rows = cells
            .iter()
            .enumerate()
            .map(|(i, &(rung, pcr, acc))| ResultRow {
                front_end: if i % 2 == 0 { FrontEnd::Lf25 } else { FrontEnd::Mfcc39 },
                mixtures: 1 << rung,
                dataset: if i % 3 == 0 { Dataset::Train } else { Dataset::Test },
                pcr,
                acc,
                counts: AlignmentResult::default(),
                confusion: Confusion::new(1),
            })
            .collect();
        let table = ResultTable { rows };
        let csv = table.to_csv();
        prop_assert!(!csv.contains('\r'));
        prop_assert_eq!(parse_csv(&csv).unwrap(), table.csv_rows());
    }
}
