use vibresc::benchmarks::{mass_spring_loop, MassSpringParams};
use vibresc::integrator::simulate;
use vibresc::{AveragedLoopF32, EscGainsF32, StateVectorF32};

#[test]
fn mass_spring_converges_in_single_precision() {
    let gains = EscGainsF32::new(vec![3.0], vec![0.3], 5.0, 50.0).unwrap();
    let lp = mass_spring_loop(MassSpringParams::<f32>::published(), 1.0, gains).unwrap();
    let x0 = StateVectorF32::pack(&[3.0], &[0.0], 0.0).unwrap();
    let dt = lp.gains().period() / 40.0;
    let truth = simulate(
        |x: &StateVectorF32, t| lp.closed_loop_rhs(x, t),
        x0.clone(),
        0.0,
        30.0,
        dt,
    )
    .unwrap();
    let tail = &truth.states[truth.index_at(27.0)..];
    let mean = tail.iter().map(|s| s[0]).sum::<f32>() / tail.len() as f32;
    assert!((mean - 1.0).abs() < 0.05, "mean {mean}");

    let avg = AveragedLoopF32::new(lp)
        .simulate(x0, 0.0, 30.0, dt)
        .unwrap();
    let last = avg.states.last().unwrap();
    assert!((last[0] - 1.0).abs() < 0.05, "averaged {}", last[0]);
}
