//! Order sensitivity of the iterative estimate.
use irgeom::estimation::{estimate_union, CaseAssignment, EstimationConfig, PairTable};
use irgeom::ratio_model::analyze_topic;
use irgeom::synthetic::{generate, SyntheticProfile};

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

#[test]
fn permuting_later_systems_moves_the_final_estimate_less_than_20_percent() {
    let profile = SyntheticProfile::default();
    let (runs, qrels, _) = generate(&profile).unwrap();
    let names = profile.system_names();
    let mut worst = 0.0f64;
    for topic in profile.topics() {
        let table = PairTable::new(
            analyze_topic(&runs, &qrels, &topic, profile.depth)
                .unwrap()
                .into_iter()
                .filter_map(|f| f.stats),
        );
        let mut finals = Vec::new();
        for tail in permutations(&names[1..]) {
            let mut order = vec![names[0].clone()];
            order.extend(tail);
            let cfg = EstimationConfig::new(order, CaseAssignment::default()).unwrap();
            let row = estimate_union(&cfg, &topic, 70.0, &table).unwrap();
            finals.push(*row.cumulative.last().unwrap());
        }
        let lo = finals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = finals.iter().cloned().fold(0.0, f64::max);
        worst = worst.max((hi - lo) / lo);
    }
    println!("worst relative spread {worst:.4}");
    assert!(worst < 0.20, "spread {worst}");
}
