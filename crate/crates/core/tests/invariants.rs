use hausstraight::decomposition::{decompose, ExtractionMode, ExtractionSchedule};
use hausstraight::fixtures::CANTOR_DIMENSION;
use hausstraight::hausdorff::{content, ContentOptions, HausdorffParams};
use hausstraight::measure::{load_measure_str, measure_to_string};
use hausstraight::oracle::atom_sup_ratio;
use hausstraight::straightness::{certify, CertRequest, CertStatus};
use hausstraight::{Atom, CarrierSubset, Measure64, Point};
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = Measure64> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.01..0.3f64), 1..7).prop_map(|v| {
        let atoms = v
            .into_iter()
            .map(|(x, y, m)| Atom {
                location: Point::xy(x, y),
                mass: m,
            })
            .collect();
        Measure64::new(2, atoms, vec![]).unwrap()
    })
}

#[test]
fn cantor_dimension_constant() {
    assert!((CANTOR_DIMENSION - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certify_matches_subset_oracle(mu in cloud(), r_min in 0.02..0.3f64) {
        let p = HausdorffParams::new(1.0, f64::INFINITY).unwrap();
        let sup = atom_sup_ratio(&mu, 1.0, p.omega(), r_min, f64::INFINITY).unwrap();
        prop_assume!((sup - 1.0).abs() > 1e-6);
        let cert = certify(&mu, &CertRequest::new(p).with_r_min(r_min)).unwrap();
        let expect = if sup < 1.0 { CertStatus::Certified } else { CertStatus::Violated };
        prop_assert_eq!(cert.status, expect);
        prop_assert!(cert.lower_bound <= sup * (1.0 + 1e-9));
        if expect == CertStatus::Certified {
            prop_assert!(cert.sup_ratio_bound >= sup * (1.0 - 1e-9));
        }
    }

    #[test]
    fn decomposition_partitions_mass(mu in cloud(), r_min in 0.05..0.3f64) {
        let p = HausdorffParams::new(1.0, f64::INFINITY).unwrap();
        let sched = ExtractionSchedule::floor(r_min).unwrap();
        let dec = decompose(&mu, &p, &sched, ExtractionMode::Heuristic).unwrap();
        let mut union = CarrierSubset::empty();
        let mut sum = dec.residual.mass(&mu);
        for part in &dec.parts {
            prop_assert!(part.certificate.is_certified());
            prop_assert!(union.intersection(&part.subset).is_empty());
            union = union.union(&part.subset);
            sum += part.mass;
        }
        prop_assert!(union.intersection(&dec.residual).is_empty());
        prop_assert!((sum - mu.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn measure_json_round_trips(mu in cloud()) {
        let back: Measure64 = load_measure_str(&measure_to_string(&mu)).unwrap();
        prop_assert_eq!(back, mu);
    }

    #[test]
    fn exact_content_grows_as_scale_shrinks(mu in cloud(), s in 0.3..1.5f64, floor in 0.01..0.1f64) {
        let opts = ContentOptions::exact().with_floor(floor);
        let full = CarrierSubset::full(&mu);
        let coarse = content(&mu, &full, &HausdorffParams::new(s, 1.0).unwrap(), &opts).unwrap();
        let fine = content(&mu, &full, &HausdorffParams::new(s, 0.2).unwrap(), &opts).unwrap();
        prop_assert!(fine.upper >= coarse.upper * (1.0 - 1e-12));
        let single = HausdorffParams::new(s, 1.0).unwrap().ball_weight(floor);
        prop_assert!(coarse.upper <= mu.atoms().len() as f64 * single * (1.0 + 1e-12));
    }
}
