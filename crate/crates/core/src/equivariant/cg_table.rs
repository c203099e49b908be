//! Generated by `cargo run -p eqgrasp-core --example gen_cg_table`. Do not edit.

#[rustfmt::skip]
pub(super) static TABLE: [(usize, usize, usize, &[f64]); 15] = [
    (0, 0, 0, &[
        1.0,
    ]),
    (0, 1, 1, &[
        1.0, 0.0, 0.0,
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
    ]),
    (0, 2, 2, &[
        1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0,
    ]),
    (1, 0, 1, &[
        1.0,
        0.0,
        0.0,
        0.0,
        1.0,
        0.0,
        0.0,
        0.0,
        1.0,
    ]),
    (1, 1, 0, &[
        0.5773502691896258, 0.0, 0.0,
        0.0, 0.5773502691896258, 0.0,
        0.0, 0.0, 0.5773502691896258,
    ]),
    (1, 1, 1, &[
        0.0, 0.0, 0.0,
        0.0, 0.0, 0.7071067811865476,
        0.0, -0.7071067811865476, 0.0,
        0.0, 0.0, -0.7071067811865476,
        0.0, 0.0, 0.0,
        0.7071067811865476, 0.0, 0.0,
        0.0, 0.7071067811865476, 0.0,
        -0.7071067811865476, 0.0, 0.0,
        0.0, 0.0, 0.0,
    ]),
    (1, 1, 2, &[
        0.0, 0.0, 0.7071067811865476,
        0.0, 0.0, 0.0,
        0.7071067811865476, 0.0, 0.0,
        0.0, 0.7071067811865476, 0.0,
        0.7071067811865476, 0.0, 0.0,
        0.0, 0.0, 0.0,
        -0.4082482904638631, 0.0, 0.0,
        0.0, 0.8164965809277261, 0.0,
        0.0, 0.0, -0.4082482904638631,
        0.0, 0.0, 0.0,
        0.0, 0.0, 0.7071067811865476,
        0.0, 0.7071067811865476, 0.0,
        -0.7071067811865476, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.0, 0.0, 0.7071067811865476,
    ]),
    (1, 2, 1, &[
        0.0, 0.0, -0.31622776601683794, 0.0, -0.5477225575051661,
        0.0, 0.5477225575051661, 0.0, 0.0, 0.0,
        0.5477225575051661, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.5477225575051661, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.6324555320336759, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.5477225575051661, 0.0,
        0.5477225575051661, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.5477225575051661, 0.0,
        0.0, 0.0, -0.31622776601683794, 0.0, 0.5477225575051661,
    ]),
    (1, 2, 2, &[
        0.0, 0.4082482904638631, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.8164965809277261,
        0.0, 0.0, 0.0, -0.4082482904638631, 0.0,
        -0.4082482904638631, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.4082482904638631, 0.0,
        0.0, 0.0, -0.7071067811865476, 0.0, -0.4082482904638631,
        0.0, 0.0, 0.0, -0.7071067811865476, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.7071067811865476, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.7071067811865476, 0.0, -0.4082482904638631,
        0.0, -0.4082482904638631, 0.0, 0.0, 0.0,
        0.4082482904638631, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.4082482904638631, 0.0,
        -0.8164965809277261, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.4082482904638631, 0.0, 0.0, 0.0,
    ]),
    (2, 0, 2, &[
        1.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        1.0,
    ]),
    (2, 1, 1, &[
        0.0, 0.0, 0.5477225575051661,
        0.0, 0.5477225575051661, 0.0,
        -0.31622776601683794, 0.0, 0.0,
        0.0, 0.0, 0.0,
        -0.5477225575051661, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.5477225575051661, 0.0, 0.0,
        0.0, 0.6324555320336759, 0.0,
        0.0, 0.0, 0.5477225575051661,
        0.0, 0.0, 0.0,
        0.5477225575051661, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.0, 0.0, -0.31622776601683794,
        0.0, 0.5477225575051661, 0.0,
        0.0, 0.0, 0.5477225575051661,
    ]),
    (2, 1, 2, &[
        0.0, 0.0, 0.0,
        -0.4082482904638631, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.0, 0.0, 0.4082482904638631,
        0.0, -0.8164965809277261, 0.0,
        0.4082482904638631, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.0, 0.0, 0.7071067811865476,
        0.0, -0.4082482904638631, 0.0,
        0.0, 0.0, 0.4082482904638631,
        0.0, 0.0, 0.0,
        0.0, 0.0, -0.7071067811865476,
        0.0, 0.0, 0.0,
        0.7071067811865476, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.0, 0.0, -0.4082482904638631,
        0.0, 0.4082482904638631, 0.0,
        -0.7071067811865476, 0.0, 0.0,
        0.0, 0.0, 0.0,
        0.4082482904638631, 0.0, 0.0,
        0.0, 0.8164965809277261, 0.0,
        0.0, 0.0, -0.4082482904638631,
        0.0, 0.0, 0.0,
        -0.4082482904638631, 0.0, 0.0,
        0.0, 0.0, 0.0,
    ]),
    (2, 2, 0, &[
        0.4472135954999579, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.4472135954999579, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.4472135954999579, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.4472135954999579, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.4472135954999579,
    ]),
    (2, 2, 1, &[
        0.0, 0.31622776601683794, 0.0, 0.0, 0.0,
        -0.31622776601683794, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -0.5477225575051662, 0.0,
        0.0, 0.0, 0.5477225575051662, 0.0, -0.31622776601683794,
        0.0, 0.0, 0.0, 0.31622776601683794, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.6324555320336759,
        0.0, 0.0, 0.0, 0.31622776601683794, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, -0.31622776601683794, 0.0, 0.0, 0.0,
        -0.6324555320336759, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -0.31622776601683794, 0.0,
        0.0, 0.0, -0.5477225575051662, 0.0, -0.31622776601683794,
        0.0, 0.5477225575051662, 0.0, 0.0, 0.0,
        0.31622776601683794, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.31622776601683794, 0.0, 0.0, 0.0,
    ]),
    (2, 2, 2, &[
        0.0, 0.0, -0.5345224838248488, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.4629100498862758, 0.0,
        -0.5345224838248488, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.4629100498862758, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.4629100498862758, 0.0,
        0.0, 0.0, 0.2672612419124244, 0.0, -0.4629100498862758,
        0.0, 0.2672612419124244, 0.0, 0.0, 0.0,
        0.4629100498862758, 0.0, 0.0, 0.0, 0.0,
        0.0, -0.4629100498862758, 0.0, 0.0, 0.0,
        -0.5345224838248489, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.26726124191242445, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.5345224838248489, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.26726124191242445, 0.0,
        0.0, 0.0, 0.0, 0.0, -0.5345224838248489,
        0.0, 0.4629100498862758, 0.0, 0.0, 0.0,
        0.4629100498862758, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.2672612419124244, 0.0,
        0.0, 0.0, 0.2672612419124244, 0.0, 0.4629100498862758,
        0.0, 0.0, 0.0, 0.4629100498862758, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, -0.4629100498862758, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, -0.5345224838248488,
        0.0, 0.0, 0.0, 0.4629100498862758, 0.0,
        0.0, 0.0, -0.5345224838248488, 0.0, 0.0,
    ]),
];
