//! Shared fixtures for the CLI integration and acceptance tests.

#![allow(dead_code)]

use std::fmt::Write as _;

use psrf_core::samplers::Rng;

/// Coefficients used to draw survival in the synthetic passenger table, in
/// design-matrix order.
pub const SURROGATE_BETA: [f64; 10] = [
    5.25, -1.27, -2.39, -2.64, -0.043, -0.36, -0.06, 0.0015, -0.82, -0.40,
];

/// A deterministic stand-in for the Titanic `train.csv`: 891 passengers with
/// the same columns, factor levels and missingness pattern (177 missing
/// ages, 2 missing ports), survival drawn from a logistic model.
pub fn titanic_surrogate_csv(seed: u64) -> String {
    let mut rng = Rng::new(seed, 0);
    let mut out = String::from(
        "PassengerId,Survived,Pclass,Name,Sex,Age,SibSp,Parch,Ticket,Fare,Cabin,Embarked\n",
    );
    let rows = 891;
    let missing_age: Vec<bool> = spread_flags(rows, 177, 7);
    let missing_port: Vec<bool> = spread_flags(rows, 2, 401);
    for id in 1..=rows {
        let u = rng.uniform();
        let class = if u < 216.0 / 891.0 {
            1
        } else if u < 400.0 / 891.0 {
            2
        } else {
            3
        };
        let male = rng.uniform() < 577.0 / 891.0;
        let age = (29.7 + 14.5 * rng.normal()).clamp(0.42, 80.0);
        let age = (age * 2.0).round() / 2.0;
        let sibsp = poisson(&mut rng, 0.52).min(8);
        let parch = poisson(&mut rng, 0.38).min(6);
        let base_fare = match class {
            1 => 60.0,
            2 => 15.0,
            _ => 8.0,
        };
        let fare = ((base_fare * (0.5 * rng.normal()).exp()) * 1e4).round() / 1e4;
        let v = rng.uniform();
        let port = if v < 168.0 / 889.0 {
            "C"
        } else if v < 245.0 / 889.0 {
            "Q"
        } else {
            "S"
        };
        let x = [
            1.0,
            (class == 2) as u8 as f64,
            (class == 3) as u8 as f64,
            male as u8 as f64,
            age,
            sibsp as f64,
            parch as f64,
            fare,
            (port == "Q") as u8 as f64,
            (port == "S") as u8 as f64,
        ];
        let eta: f64 = x.iter().zip(SURROGATE_BETA).map(|(a, b)| a * b).sum();
        let survived = rng.uniform() < 1.0 / (1.0 + (-eta).exp());
        let _ = writeln!(
            out,
            "{id},{},{class},\"Passenger, No. {id}\",{},{},{sibsp},{parch},T{id},{fare},,{}",
            survived as u8,
            if male { "male" } else { "female" },
            if missing_age[id - 1] {
                String::new()
            } else {
                age.to_string()
            },
            if missing_port[id - 1] { "" } else { port },
        );
    }
    out
}

/// `count` flags set at a fixed stride pattern.
fn spread_flags(len: usize, count: usize, offset: usize) -> Vec<bool> {
    let mut flags = vec![false; len];
    for k in 0..count {
        flags[(offset + k * len / count) % len] = true;
    }
    flags
}

fn poisson(rng: &mut Rng, lambda: f64) -> u32 {
    let limit = (-lambda).exp();
    let mut k = 0;
    let mut prod = rng.uniform();
    while prod > limit {
        k += 1;
        prod *= rng.uniform();
    }
    k
}
