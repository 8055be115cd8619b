use std::time::Instant;

use bltc::aggregation::{aggregated_target, derive_block_weights, padded_len};
use bltc::engine::{pair, G1Element, G2Element, GtElement, Scalar};
use bltc::*;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

struct World {
    pp: PublicParams,
    ck: IpaCommitKey,
}

fn world(n: u32, max_u: usize, r: &mut ChaCha20Rng) -> World {
    let pp = PublicParams::generate(n, r).unwrap();
    let ck = IpaCommitKey::generate(padded_len(max_u, n), r).unwrap();
    World { pp, ck }
}

fn honest(
    wd: &World,
    keys: Option<&WatermarkKeyPair>,
    u: usize,
    r: &mut ChaCha20Rng,
) -> (AggregationInstance, Vec<PathProof>) {
    let n = wd.pp.height();
    let w = WeightVector::random(n, r);
    let c = commit(&wd.pp, &w).unwrap();
    let tree = match keys {
        Some(k) => open_all(&WatermarkedParams::new(&wd.pp, &k.secret()).unwrap(), &w).unwrap(),
        None => open_all(&wd.pp, &w).unwrap(),
    };
    let positions: Vec<u64> = sample(r, 1 << n, u).into_iter().map(|i| i as u64).collect();
    let values = positions.iter().map(|&i| w.get(i).unwrap()).collect();
    let proofs = positions.iter().map(|&i| tree.open(i).unwrap()).collect();
    let pvk = keys
        .map(|k| k.public())
        .unwrap_or_else(G2Element::generator);
    let inst = AggregationInstance::single_worker(c, positions, values, pvk).unwrap();
    (inst, proofs)
}

#[test]
fn completeness_across_shapes() {
    let mut r = rng(1);
    for n in 2..=5u32 {
        let wd = world(n, 1 << n, &mut r);
        // at n = 2 a set of 7 cannot exist; use the whole vector
        for u in [1usize, 2, 7.min(1 << n), 1 << n] {
            for trial in 0..50 {
                let (inst, proofs) = honest(&wd, None, u, &mut r);
                let p = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
                assert!(
                    verify_aggregated(&wd.pp, &wd.ck, &inst, &p).unwrap(),
                    "n={n} u={u} trial={trial}"
                );
            }
        }
    }
}

#[test]
fn weighted_target_equals_direct_path_product() {
    let mut r = rng(2);
    let wd = world(4, 8, &mut r);
    for _ in 0..10 {
        let keys = WatermarkKeyPair::generate(&mut r);
        let (inst, proofs) = honest(&wd, Some(&keys), 5, &mut r);
        let p = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
        let v = derive_block_weights(&wd.pp, &inst, &p);
        let g2 = G2Element::generator();
        let mut direct = GtElement::identity();
        for (k, proof) in proofs.iter().enumerate() {
            let mut block = GtElement::identity();
            for j in 1..=4u32 {
                let key = *wd.pp.vk(j) - g2 * Scalar::from(proof.position().bit(j) as u64);
                block += pair(proof.node(j), &key);
            }
            direct += block * v[k];
        }
        assert_eq!(aggregated_target(&inst, &v), direct);
        assert_eq!(p.z, direct);
    }
}

#[test]
fn single_perturbations_rejected() {
    let mut r = rng(3);
    let wd = world(3, 3, &mut r);
    let mut rejected = 0;
    let mut trials = 0;
    while trials < 1000 {
        let (inst, proofs) = honest(&wd, None, 3, &mut r);
        let p = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
        for _ in 0..50 {
            let mut i2 = inst.clone();
            let mut p2 = p.clone();
            let bump = GtElement::generator() * Scalar::random_nonzero(&mut r);
            match trials % 4 {
                0 => {
                    let k = r.gen_range(0..i2.len());
                    i2.values[k] += Scalar::random_nonzero(&mut r);
                }
                1 => {
                    let k = r.gen_range(0..p2.rounds.len());
                    let m = &mut p2.rounds[k];
                    match r.gen_range(0..5) {
                        0 => m.z_l += bump,
                        1 => m.z_r += bump,
                        2 => m.b_l += bump,
                        3 => m.b_r += bump,
                        _ => p2.final_r += G1Element::random(&mut r),
                    }
                }
                2 => p2.b += bump,
                _ => {
                    let k = r.gen_range(0..i2.len());
                    i2.pvks[k] = G2Element::random(&mut r);
                }
            }
            if !verify_aggregated(&wd.pp, &wd.ck, &i2, &p2).unwrap() {
                rejected += 1;
            }
            trials += 1;
        }
    }
    assert_eq!(rejected, trials);
}

#[test]
fn element_count_grows_by_four_per_doubling() {
    let mut r = rng(4);
    let wd = world(3, 8, &mut r);
    let mut prev: Option<usize> = None;
    for u in [1usize, 2, 4, 8] {
        let (inst, proofs) = honest(&wd, None, u, &mut r);
        let p = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
        let m = padded_len(u, 3);
        assert_eq!(p.element_count(), 4 * m.trailing_zeros() as usize + 3);
        if let Some(c) = prev {
            assert_eq!(p.element_count(), c + 4);
        }
        prev = Some(p.element_count());
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

#[test]
fn watermark_does_not_change_cost() {
    let mut r = rng(5);
    let wd = world(4, 16, &mut r);
    let unit = WatermarkKeyPair::from_secret(Scalar::one(), false).unwrap();
    let keyed = WatermarkKeyPair::generate(&mut r);
    let mut time_for = |keys: &WatermarkKeyPair| {
        let (inst, proofs) = honest(&wd, Some(keys), 16, &mut r);
        let runs: Vec<f64> = (0..7)
            .map(|_| {
                let t = Instant::now();
                let p = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
                assert!(verify_aggregated(&wd.pp, &wd.ck, &inst, &p).unwrap());
                t.elapsed().as_secs_f64()
            })
            .collect();
        median(runs)
    };
    let base = time_for(&unit);
    let marked = time_for(&keyed);
    let ratio = marked / base;
    assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn single_position_matches_individual_check() {
    let mut r = rng(6);
    let wd = world(3, 1, &mut r);
    let g2 = G2Element::generator();
    for case in 0..100 {
        let (mut inst, mut proofs) = honest(&wd, None, 1, &mut r);
        match case % 3 {
            0 => {}
            1 => inst.values[0] += Scalar::random_nonzero(&mut r),
            _ => {
                let mut nodes = proofs[0].nodes().to_vec();
                let k = r.gen_range(0..nodes.len());
                nodes[k] += G1Element::random(&mut r);
                proofs[0] = PathProof::new(proofs[0].position(), nodes, false);
            }
        }
        let single = verify_individual(
            &wd.pp,
            &inst.commitment,
            proofs[0].position(),
            &inst.values[0],
            &proofs[0],
            &g2,
        )
        .unwrap();
        let agg = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
        let aggregated = verify_aggregated(&wd.pp, &wd.ck, &inst, &agg).unwrap();
        assert_eq!(single, aggregated, "case {case}");
        assert_eq!(single, case % 3 == 0);
    }
}

#[test]
fn perturbed_values_rejected() {
    let mut r = rng(7);
    let wd = world(3, 4, &mut r);
    let (inst, proofs) = honest(&wd, None, 4, &mut r);
    let p = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
    for _ in 0..500 {
        let mut i2 = inst.clone();
        let k = r.gen_range(0..i2.len());
        i2.values[k] += Scalar::random_nonzero(&mut r);
        assert!(!verify_aggregated(&wd.pp, &wd.ck, &i2, &p).unwrap());
    }
}

#[test]
fn all_positions_at_height_four() {
    let mut r = rng(8);
    let wd = world(4, 16, &mut r);
    let (inst, proofs) = honest(&wd, None, 16, &mut r);
    let p = aggregate(&wd.pp, &wd.ck, &inst, &proofs).unwrap();
    assert!(verify_aggregated(&wd.pp, &wd.ck, &inst, &p).unwrap());
    // m = 64: six rounds of four target-group elements, plus B, Z and one G1
    assert_eq!(p.m_padded, 64);
    assert_eq!(p.rounds.len(), 6);
    assert_eq!(p.element_count(), 27);
}
