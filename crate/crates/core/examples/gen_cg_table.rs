//! Prints `src/equivariant/cg_table.rs`.
//!
//! cargo run -p eqgrasp-core --example gen_cg_table > crates/core/src/equivariant/cg_table.rs

use eqgrasp_core::equivariant::cg::{generate, PATHS};

fn main() {
    println!("//! Generated by `cargo run -p eqgrasp-core --example gen_cg_table`. Do not edit.");
    println!();
    println!("#[rustfmt::skip]");
    println!("pub(super) static TABLE: [(usize, usize, usize, &[f64]); {}] = [", PATHS.len());
    for p in PATHS {
        let c = generate(p.l1, p.l2, p.l3).expect("admissible");
        println!("    ({}, {}, {}, &[", p.l1, p.l2, p.l3);
        for row in c.chunks(p.dims().1) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            println!("        {},", cells.join(", "));
        }
        println!("    ]),");
    }
    println!("];");
}
