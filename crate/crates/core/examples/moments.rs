//! Velocity moments of one exponential species: closed form against Gauss–Hermite
//! quadrature of the same integrand, and the proportionality j = βA.
//!
//! cargo run --release --example moments

use vmbif::ansatz::{
    beta_of, build_species, family_by_name, moment_current, moment_density, SpeciesSpec, Vec3,
    BETA_SAMPLES,
};

fn main() -> vmbif::Result<()> {
    let spec = SpeciesSpec {
        q: -1.0,
        m: 1.0,
        alpha: 1.5,
        k: 1.0,
        c1: 0.2,
        c2: -0.1,
    };
    let exact = vmbif::ansatz::AnsatzFamily::Exponential;
    let quad = family_by_name("exponential-quadrature").expect("registered family");
    let s = &build_species(&[spec], Vec3::new(0.0, 0.0, 0.8), &exact)?[0];

    println!(
        "{:>6} {:>6} {:>22} {:>22} {:>10}",
        "x", "y", "A closed form", "A quadrature", "rel err"
    );
    for (x, y) in [(0.0, 0.0), (0.5, -0.3), (-1.0, 0.7), (1.5, 1.5)] {
        let a = moment_density(s, &exact, x, y)?;
        let b = moment_density(s, &quad, x, y)?;
        println!(
            "{x:6.2} {y:6.2} {a:22.15e} {b:22.15e} {:10.2e}",
            (a - b).abs() / a
        );
    }
    let j = moment_current(s, &exact, 0.3, 0.1)?;
    let beta = beta_of(s, &exact, &BETA_SAMPLES)?;
    println!("j_z(0.3, 0.1) = {:.12}", j.z);
    println!(
        "beta = ({:.3e}, {:.3e}, {:.12})   d/(2 alpha) = {:.12}",
        beta.x,
        beta.y,
        beta.z,
        0.8 / 3.0
    );
    Ok(())
}
