//! Brute-force reference for energy-threshold segmentation: tests every
//! (onset, offset) pair against the segment definition directly.

#![allow(dead_code)]

fn quiet_run_at_least(loud: &[bool], from: usize, to: usize, m: usize) -> bool {
    let mut run = 0;
    for &l in &loud[from..to] {
        run = if l { 0 } else { run + 1 };
        if run >= m {
            return true;
        }
    }
    false
}

fn onset_at(loud: &[bool], s: usize, k: usize) -> bool {
    s + k <= loud.len() && loud[s..s + k].iter().all(|&l| l)
}

pub fn segments(loud: &[bool], k: usize, m: usize) -> Vec<(usize, usize)> {
    let n = loud.len();
    let mut out = Vec::new();
    for s in 0..n {
        if !onset_at(loud, s, k) {
            continue;
        }
        // an earlier onset with no long pause in between owns this stretch
        let shadowed = (0..s).any(|p| onset_at(loud, p, k) && !quiet_run_at_least(loud, p, s, m));
        if shadowed {
            continue;
        }
        for e in s..n {
            let closes = loud[e] && loud[e + 1..n.min(e + 1 + m)].iter().all(|&l| !l);
            if closes && !quiet_run_at_least(loud, s, e + 1, m) {
                out.push((s, e));
            }
        }
    }
    out
}
