use irgeom::accumulation::{accumulate, overlap};
use irgeom::synthetic::{generate, oracle_union, SyntheticProfile};
use irgeom::trec_io::judge;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn three_way_union_matches_inclusion_exclusion_from_curves() {
    let profile = SyntheticProfile { seed: 11, ..SyntheticProfile::default() };
    let (runs, qrels, truth) = generate(&profile).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let depth = profile.depth;
    for topic in profile.topics() {
        let pick = sample(&mut rng, runs.len(), 3).into_vec();
        let lists: Vec<_> = pick
            .iter()
            .map(|&i| judge(&runs[i], &qrels, &topic, depth).unwrap().padded_to(depth))
            .collect();
        let single: i64 = lists.iter().map(|l| i64::from(accumulate(l).last())).sum();
        let pair = |a: usize, b: usize| i64::from(overlap(&[&lists[a], &lists[b]]).unwrap().last());
        let triple = i64::from(overlap(&[&lists[0], &lists[1], &lists[2]]).unwrap().last());
        let by_curves = single - pair(0, 1) - pair(0, 2) - pair(1, 2) + triple;
        let names: Vec<&str> = pick.iter().map(|&i| runs[i].system.as_str()).collect();
        let exact = oracle_union(&truth, &topic, &names, depth).unwrap() as i64;
        assert_eq!(by_curves, exact, "topic {topic} systems {names:?}");
    }
}

#[test]
fn ground_truth_satisfies_inclusion_exclusion_for_every_subset() {
    let profile = SyntheticProfile { seed: 5, num_topics: 4, ..SyntheticProfile::default() };
    let (_, _, truth) = generate(&profile).unwrap();
    let names = profile.system_names();
    let m = names.len();
    for topic in profile.topics() {
        for depth in [10, 50, 100] {
            for mask in 1u32..(1 << m) {
                let subset: Vec<&str> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| names[i].as_str()).collect();
                // sum over non-empty sub-subsets of (-1)^(|s|+1) |intersection|
                let mut total = 0i64;
                for sub in 1u32..(1 << subset.len()) {
                    let members: Vec<&str> = (0..subset.len()).filter(|i| sub & (1 << i) != 0).map(|i| subset[i]).collect();
                    let sign = if members.len() % 2 == 1 { 1 } else { -1 };
                    total += sign * truth.intersection_count(&topic, &members, depth).unwrap() as i64;
                }
                assert_eq!(total, truth.union_count(&topic, &subset, depth).unwrap() as i64);
            }
        }
    }
}

#[test]
fn singleton_and_clone_unions() {
    let profile = SyntheticProfile { num_topics: 3, ..SyntheticProfile::default() };
    let (runs, qrels, truth) = generate(&profile).unwrap();
    for topic in profile.topics() {
        for run in &runs {
            let a = accumulate(&judge(run, &qrels, &topic, 100).unwrap()).last() as usize;
            assert_eq!(oracle_union(&truth, &topic, &[run.system.as_str()], 100).unwrap(), a);
        }
    }
    let clones = SyntheticProfile {
        num_topics: 3,
        recall: vec![1.0; 5],
        overlap_boost: 1.0,
        ..SyntheticProfile::default()
    };
    let (_, _, truth) = generate(&clones).unwrap();
    for topic in clones.topics() {
        let all: Vec<String> = clones.system_names();
        let all: Vec<&str> = all.iter().map(String::as_str).collect();
        assert_eq!(
            oracle_union(&truth, &topic, &all, 100).unwrap(),
            oracle_union(&truth, &topic, &all[..1], 100).unwrap()
        );
    }
    assert!(oracle_union(&truth, &clones.topics()[0], &["nope"], 100).is_err());
}
