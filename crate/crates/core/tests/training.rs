use exmo_core::autoencoder::{encode_model, evaluate_loss, train, Model, NetworkConfig, TrainPlan};
use exmo_core::synthcam::{generate, SynthSpec, Texture};
use exmo_core::Tensor;

fn tiny_stacks(n: usize) -> Vec<Tensor<f32>> {
    let spec = SynthSpec { size: 32, ..SynthSpec::new(Texture::Noise, 1.0, n + 4, 3) };
    let seq = generate(&spec).unwrap();
    (0..n).map(|i| seq.stack_tensor(i, 5).unwrap()).collect()
}

fn tiny_model(seed: u64) -> Model {
    Model::build(NetworkConfig { input_size: 32, ..NetworkConfig::with_base(4, seed) }).unwrap()
}

#[test]
fn windowed_loss_strictly_decreases_after_step_100() {
    let data = tiny_stacks(8);
    let mut m = tiny_model(1);
    let plan = TrainPlan { max_steps: Some(400), ..Default::default() };
    let losses = train(&mut m, &data, &plan).unwrap().losses;
    let means: Vec<f64> = losses[100..].chunks(50).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect();
    for w in means.windows(2) {
        assert!(w[1] < w[0], "window means {means:?}");
    }
}

#[test]
fn overfit_model_prefers_true_frame_order() {
    let data = tiny_stacks(8);
    let mut m = tiny_model(2);
    let plan = TrainPlan { max_steps: Some(400), ..Default::default() };
    train(&mut m, &data, &plan).unwrap();
    let stack = &data[0];
    let plane = 32 * 32;
    let mut permuted = Vec::with_capacity(stack.len());
    for c in [3, 0, 4, 1, 2] {
        permuted.extend_from_slice(&stack.data()[c * plane..(c + 1) * plane]);
    }
    let permuted = Tensor::from_vec(&[5, 32, 32], permuted).unwrap();
    let ordered = evaluate_loss(&m, std::slice::from_ref(stack)).unwrap();
    let shuffled = evaluate_loss(&m, &[permuted]).unwrap();
    assert!(ordered < shuffled, "ordered {ordered} vs permuted {shuffled}");
}

fn trained_bytes(threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut m = tiny_model(7);
        let plan = TrainPlan { max_steps: Some(6), batch_size: 3, shuffle_seed: 11, ..Default::default() };
        train(&mut m, &tiny_stacks(7), &plan).unwrap();
        encode_model(&m)
    })
}

#[test]
fn training_is_bit_identical_across_thread_counts() {
    let one = trained_bytes(1);
    assert_eq!(one, trained_bytes(1));
    assert_eq!(one, trained_bytes(3));
}
