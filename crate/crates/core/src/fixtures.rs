use alloc::string::ToString;
use alloc::vec::Vec;

use crate::design::{build_fleet, make_tdes, DesignOptions, DeviceInput, Fleet, Role, ShapeInput};

pub fn input(name: &str, shape: ShapeInput, tau: f64, rating: f64) -> DeviceInput {
    DeviceInput {
        name: name.to_string(),
        bus: name.to_string(),
        role: Role::Forming,
        shape,
        tau,
        mu: None,
        rating,
        tau_dc: tau,
        p_capacity: None,
    }
}

pub fn case1_inputs() -> Vec<DeviceInput> {
    alloc::vec![
        input("wind", ShapeInput::Lpf, 1.5, 46.0),
        input("pv", ShapeInput::Lpf, 0.6, 73.0),
        input("bess", ShapeInput::Complement, 0.2, 60.0),
    ]
}

pub fn case1() -> Fleet {
    build_fleet(
        make_tdes(5.55, 33.33, 0.01).unwrap(),
        &case1_inputs(),
        100.0,
        DesignOptions::default(),
    )
    .unwrap()
}
