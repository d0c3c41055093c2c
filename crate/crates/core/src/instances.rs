//! Bundled instances.
//!
//! * `fig1`: 6-node physical ring with a 4-node logical ring and a reference routing.
//! * `nsf-ln1`: 14-node NSFNET substrate with a logical overlay that admits a survivable
//!   routing.
//! * `nsf-ln2`: the same substrate with an overlay that does not (it contains a logical
//!   bridge).

use crate::instance_file::parse_instance;
use crate::model::{CrossLayerInstance, LinkMapping};

pub const FIG1: &str = include_str!("../instances/fig1.xln");
pub const NSF_LN1: &str = include_str!("../instances/nsf-ln1.xln");
pub const NSF_LN2: &str = include_str!("../instances/nsf-ln2.xln");

/// File names and contents of all bundled instances.
pub const ALL: [(&str, &str); 3] = [
    ("fig1.xln", FIG1),
    ("nsf-ln1.xln", NSF_LN1),
    ("nsf-ln2.xln", NSF_LN2),
];

fn load(text: &str) -> (CrossLayerInstance, Option<LinkMapping>) {
    parse_instance(text).expect("bundled instances are valid")
}

/// The worked example and its reference routing.
pub fn fig1() -> (CrossLayerInstance, LinkMapping) {
    let (inst, routes) = load(FIG1);
    (inst, routes.expect("fig1 carries routes"))
}

pub fn nsf_ln1() -> CrossLayerInstance {
    load(NSF_LN1).0
}

pub fn nsf_ln2() -> CrossLayerInstance {
    load(NSF_LN2).0
}
