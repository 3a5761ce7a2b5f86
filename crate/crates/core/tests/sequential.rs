// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use rtlock::backend::DEFAULT_KEY_PORT;
use rtlock::harness::{self, Mode};
use rtlock::lock::{Budget, TechniqueSet};
use rtlock::sim::Simulator;

#[test]
fn fir_impulse_response() {
    let f = fixture("fir4");
    let l = lock(&f.design, TechniqueSet::ALL, Budget::Percent(100), 7);
    let stim: Vec<Vec<u128>> = [1, 0, 0, 0, 0].iter().map(|&x| vec![x]).collect();
    let want: Vec<Vec<u128>> = [3, 5, 7, 2, 0].iter().map(|&y| vec![y]).collect();
    assert_eq!(f.sim().run(&[], &stim).unwrap(), want);
    let ls = Simulator::new(&l.wired, DEFAULT_KEY_PORT).unwrap();
    assert_eq!(ls.run(l.key(), &stim).unwrap(), want);
}

fn gcd_run(sim: &Simulator, key: &[bool], a: u128, b: u128) -> u128 {
    let mut s = sim.session();
    s.set_key(key).unwrap();
    s.reset_sequence().unwrap();
    s.apply(&[1, a, b]).unwrap();
    s.settle().unwrap();
    s.clock().unwrap();
    for _ in 0..600 {
        s.apply(&[0, 0, 0]).unwrap();
        s.settle().unwrap();
        if s.peek("done") == Some(1) {
            return s.peek("result").unwrap();
        }
        s.clock().unwrap();
    }
    panic!("gcd({a}, {b}) did not finish");
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn gcd_computes_gcd_when_locked() {
    let f = fixture("gcd");
    let l = lock(&f.design, TechniqueSet::ALL, Budget::Percent(100), 3);
    let ls = Simulator::new(&l.wired, DEFAULT_KEY_PORT).unwrap();
    assert_eq!(f.sim().inputs().iter().map(|p| p.name.as_str()).collect::<Vec<_>>(), ["load", "a_in", "b_in"]);
    for (a, b) in [(48, 18), (17, 5), (200, 120), (9, 0), (1, 255)] {
        assert_eq!(gcd_run(&f.sim(), &[], a, b), gcd(a, b));
        assert_eq!(gcd_run(&ls, l.key(), a, b), gcd(a, b));
    }
}

#[test]
fn gcd_random_equivalence() {
    let f = fixture("gcd");
    let l = lock(&f.design, TechniqueSet::ALL, Budget::Percent(100), 3);
    let mode = Mode::Random { vectors: 1000, cycles: 16, seed: 9 };
    let res = harness::check_correctness(&f.design, &l.wired, l.key(), DEFAULT_KEY_PORT, mode).unwrap();
    assert!(res.pass, "{:?}", res.counterexample);
    assert_eq!(res.points, 1000 * 16 * 9);
}

#[test]
fn counter_wraps_at_six() {
    let f = fixture("counter6");
    let stim: Vec<Vec<u128>> = vec![vec![1]; 8];
    let t = f.sim().run(&[], &stim).unwrap();
    let q: Vec<u128> = t.iter().map(|v| v[0]).collect();
    assert_eq!(q, [0, 1, 2, 3, 4, 5, 0, 1]);
}
