//! Monte-Carlo checks of the rehearsal gradient: weight lambda at the start
//! of a task, beta_t * lambda at its end, and orbit averaging under
//! augmentation.

use ocl_core::analysis::{beta_t, verify_prop1, verify_prop3, Prop1Config, Prop3Config, Tolerances};
use ocl_core::augment::FiniteGroup;

fn main() -> ocl_core::Result<()> {
    let trials = 200_000;
    let start = verify_prop1(&Prop1Config::tiny(6, 3, 6, 0, 0), trials, 1, Tolerances::default())?;
    println!(
        "start of task: weight {:.4} (predicted {}), cosine {:.6}, {:?}",
        start.empirical_weight, start.predicted_weight, start.cosine, start.status
    );
    let end = verify_prop1(
        &Prop1Config::tiny(6, 3, 6, 3, 0),
        trials,
        1,
        Tolerances {
            weight: 0.03,
            ..Tolerances::default()
        },
    )?;
    println!(
        "end of task 2: weight {:.4} (predicted {:.4} = beta {:.4} x lambda 2), {:?}",
        end.empirical_weight,
        end.predicted_weight,
        beta_t(6, 6)?,
        end.status
    );
    for (name, group) in [
        ("flip", FiniteGroup::horizontal_flips(4, 4)),
        ("rot4", FiniteGroup::rotations(4)),
    ] {
        let v = verify_prop3(
            &Prop3Config::tiny_images(4, 6, 3, 0),
            &group,
            100_000,
            2,
            Tolerances::default(),
        )?;
        println!("{name}: cosine {:.6}, {:?}", v.cosine, v.status);
    }
    Ok(())
}
