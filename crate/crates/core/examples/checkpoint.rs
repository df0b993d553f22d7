//! Checkpoint save/load round trip and shape validation.

use jkpe::encoder::init_lookup;
use jkpe::model::{load_checkpoint, save_checkpoint, ModelParams, ModelShape};

fn main() -> jkpe::Result<()> {
    let dir = std::env::temp_dir().join("jkpe-checkpoint-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let shape = ModelShape { k_max: 5, d: 16, d_out: 16 };
    let lookup = init_lookup(["graph", "kernel", "method"], shape.d, 1)?;
    let params = ModelParams::init(shape, Some(lookup), 1)?;

    let (a, b) = (dir.join("a.ckpt"), dir.join("b.ckpt"));
    save_checkpoint(&params, &a)?;
    let loaded = load_checkpoint(&a)?;
    save_checkpoint(&loaded, &b)?;
    let bytes = std::fs::read(&a).expect("read");
    assert_eq!(bytes, std::fs::read(&b).expect("read"));
    assert_eq!(loaded, params);
    println!("{} parameters, {} bytes, byte-identical after reload", params.num_params(), bytes.len());
    println!("tensors: {:?}", loaded.tensor_names());

    let err = loaded.expect_shape(&ModelShape { k_max: 3, ..shape }).unwrap_err();
    println!("configured for K=3: {err}");
    Ok(())
}
