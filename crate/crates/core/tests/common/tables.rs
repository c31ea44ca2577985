//! Two-method yield error fixtures (kg/ha): per slot, the mean and standard
//! deviation of absolute yield errors for wheat, barley and canola, first
//! for the generative method and then for the conventional one.

use std::collections::BTreeMap;

pub const CROPS: [&str; 3] = ["wheat", "barley", "canola"];

pub type Row = (&'static str, [f64; 6], [f64; 6]);

pub const SINGLE_SEASON: [Row; 3] = [
    (
        "2021",
        [525., 436., 783., 559., 841., 655.],
        [747., 491., 1100., 722., 1277., 983.],
    ),
    (
        "2022",
        [1367., 659., 1792., 932., 1310., 821.],
        [1421., 782., 2175., 1318., 1866., 1135.],
    ),
    (
        "2023",
        [820., 648., 1523., 1030., 2038., 987.],
        [1198., 737., 1993., 1234., 2163., 1096.],
    ),
];

pub const ROTATIONS: [Row; 6] = [
    (
        "WBC",
        [893., 604., 736., 660., 672., 491.],
        [896., 472., 1720., 1245., 746., 507.],
    ),
    (
        "WCB",
        [893., 604., 1127., 708., 969., 704.],
        [914., 471., 1290., 703., 1272., 900.],
    ),
    (
        "BWC",
        [911., 641., 887., 624., 680., 492.],
        [1781., 1020., 1074., 864., 827., 562.],
    ),
    (
        "BCW",
        [948., 666., 887., 624., 878., 651.],
        [1162., 686., 1051., 844., 1112., 712.],
    ),
    (
        "CWB",
        [929., 608., 1142., 711., 1087., 502.],
        [1800., 996., 1234., 711., 618., 480.],
    ),
    (
        "CBW",
        [971., 689., 722., 640., 1087., 502.],
        [1174., 713., 1734., 1238., 602., 495.],
    ),
];

/// `crop/slot/mean|std` metric maps for the generative and conventional
/// methods.
pub fn metric_maps(rows: &[Row]) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut a = BTreeMap::new();
    let mut b = BTreeMap::new();
    for (slot, generative, conventional) in rows {
        for (i, crop) in CROPS.iter().enumerate() {
            for (j, stat) in ["mean", "std"].iter().enumerate() {
                let key = format!("{crop}/{slot}/{stat}");
                a.insert(key.clone(), generative[2 * i + j]);
                b.insert(key, conventional[2 * i + j]);
            }
        }
    }
    (a, b)
}
