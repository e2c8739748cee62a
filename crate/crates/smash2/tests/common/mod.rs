//! Reference machines shared by the integration suites.

use smash2::pfsa::{Pfsa, StateRecord};

/// Two-state binary machine, rows (.6, .4) / (.4, .6); transitions follow the
/// emitted symbol.
pub fn machine_g() -> Pfsa {
    Pfsa::checked(
        2,
        vec![
            StateRecord::full(vec![0.6, 0.4], vec![0, 1]),
            StateRecord::full(vec![0.4, 0.6], vec![0, 1]),
        ],
    )
    .unwrap()
}

/// Four-state binary machine indexed by the last two symbols
/// (q00, q01, q10, q11); emitting s from q_ab moves to q_bs.
pub fn machine_h() -> Pfsa {
    Pfsa::checked(
        2,
        vec![
            StateRecord::full(vec![0.3, 0.7], vec![0, 1]),
            StateRecord::full(vec![0.2, 0.8], vec![2, 3]),
            StateRecord::full(vec![0.8, 0.2], vec![0, 1]),
            StateRecord::full(vec![0.7, 0.3], vec![2, 3]),
        ],
    )
    .unwrap()
}

/// Single-state fair coin.
#[allow(dead_code)]
pub fn fair_coin() -> Pfsa {
    Pfsa::checked(2, vec![StateRecord::full(vec![0.5, 0.5], vec![0, 0])]).unwrap()
}

/// `machine_g` with its first state duplicated; minimization must collapse it
/// back to two states.
#[allow(dead_code)]
pub fn duplicated_g() -> Pfsa {
    Pfsa::checked(
        2,
        vec![
            StateRecord::full(vec![0.6, 0.4], vec![1, 2]),
            StateRecord::full(vec![0.6, 0.4], vec![0, 2]),
            StateRecord::full(vec![0.4, 0.6], vec![0, 2]),
        ],
    )
    .unwrap()
}
