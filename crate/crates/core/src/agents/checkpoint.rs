//! Self-describing binary parameter container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic   8 bytes  "QNETCKP1"
//! seed    u64
//! episodes u64
//! count   u32      number of tensors
//! per tensor: rank u32, then rank x u32 dims
//! data    f64 x (sum of tensor element counts), row-major, declaration order
//! ```
//!
//! Agents export their tensors in declaration order: policy trunk layers
//! (weights then bias per layer), the log-std vector for Gaussian policies,
//! value or target network layers, then the observation normalizer state.

use std::io::{self, Read, Write};

use super::ppo::PolicyNet;
use super::TrainedAgent;

const MAGIC: &[u8; 8] = b"QNETCKP1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Self {
            dims: vec![rows, cols],
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub episodes: u64,
    pub tensors: Vec<Tensor>,
}

pub fn write_checkpoint<W: Write>(writer: &mut W, ckpt: &Checkpoint) -> io::Result<()> {
    writer.write_all(MAGIC)?;
    writer.write_all(&ckpt.seed.to_le_bytes())?;
    writer.write_all(&ckpt.episodes.to_le_bytes())?;
    writer.write_all(&(ckpt.tensors.len() as u32).to_le_bytes())?;
    for tensor in &ckpt.tensors {
        writer.write_all(&(tensor.dims.len() as u32).to_le_bytes())?;
        for &dim in &tensor.dims {
            writer.write_all(&(dim as u32).to_le_bytes())?;
        }
    }
    for tensor in &ckpt.tensors {
        for &value in &tensor.data {
            writer.write_all(&value.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(reader: &mut R) -> io::Result<Checkpoint> {
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "not a parameter checkpoint",
        ));
    }
    let mut u64buf = [0u8; 8];
    reader.read_exact(&mut u64buf)?;
    let seed = u64::from_le_bytes(u64buf);
    reader.read_exact(&mut u64buf)?;
    let episodes = u64::from_le_bytes(u64buf);
    let mut u32buf = [0u8; 4];
    reader.read_exact(&mut u32buf)?;
    let count = u32::from_le_bytes(u32buf) as usize;

    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        reader.read_exact(&mut u32buf)?;
        let rank = u32::from_le_bytes(u32buf) as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            reader.read_exact(&mut u32buf)?;
            dims.push(u32::from_le_bytes(u32buf) as usize);
        }
        shapes.push(dims);
    }
    let mut tensors = Vec::with_capacity(count);
    for dims in shapes {
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            reader.read_exact(&mut u64buf)?;
            data.push(f64::from_le_bytes(u64buf));
        }
        tensors.push(Tensor { dims, data });
    }
    Ok(Checkpoint {
        seed,
        episodes,
        tensors,
    })
}

fn mlp_tensors(net: &super::Mlp) -> Vec<Tensor> {
    let mut tensors = Vec::new();
    for layer in &net.layers {
        tensors.push(Tensor::matrix(layer.out_dim, layer.in_dim, layer.w.clone()));
        tensors.push(Tensor::vector(layer.b.clone()));
    }
    tensors
}

fn load_mlp_tensors(
    net: &mut super::Mlp,
    tensors: &mut std::vec::IntoIter<Tensor>,
) -> Result<(), String> {
    for layer in &mut net.layers {
        let w = tensors.next().ok_or("missing weight tensor")?;
        if w.dims != vec![layer.out_dim, layer.in_dim] {
            return Err(format!(
                "weight shape {:?} does not match layer {}x{}",
                w.dims, layer.out_dim, layer.in_dim
            ));
        }
        layer.w = w.data;
        let b = tensors.next().ok_or("missing bias tensor")?;
        if b.dims != vec![layer.out_dim] {
            return Err(format!(
                "bias shape {:?} does not match {}",
                b.dims, layer.out_dim
            ));
        }
        layer.b = b.data;
    }
    Ok(())
}

impl TrainedAgent {
    pub fn to_checkpoint(&self, seed: u64, episodes: u64) -> Checkpoint {
        let mut tensors = Vec::new();
        match self {
            TrainedAgent::Ppo(agent) => {
                match &agent.policy {
                    PolicyNet::Gaussian(p) => {
                        tensors.extend(mlp_tensors(&p.trunk));
                        tensors.push(Tensor::vector(p.log_std.clone()));
                    }
                    PolicyNet::Categorical(p) => tensors.extend(mlp_tensors(&p.trunk)),
                }
                tensors.extend(mlp_tensors(&agent.value));
                let (count, mean, m2) = agent.obs_norm.state();
                tensors.push(Tensor::vector(mean.to_vec()));
                tensors.push(Tensor::vector(m2.to_vec()));
                tensors.push(Tensor::vector(vec![count as f64]));
                tensors.push(Tensor::vector(vec![agent.ret_mean, agent.ret_std]));
            }
            TrainedAgent::Dqn(agent) => {
                tensors.extend(mlp_tensors(&agent.online));
                let (count, mean, m2) = agent.obs_norm.state();
                tensors.push(Tensor::vector(mean.to_vec()));
                tensors.push(Tensor::vector(m2.to_vec()));
                tensors.push(Tensor::vector(vec![count as f64]));
            }
        }
        Checkpoint {
            seed,
            episodes,
            tensors,
        }
    }

    /// Restore parameters from a checkpoint produced by an agent with the
    /// same architecture.
    pub fn load_checkpoint(&mut self, ckpt: Checkpoint) -> Result<(), String> {
        let mut tensors = ckpt.tensors.into_iter();
        match self {
            TrainedAgent::Ppo(agent) => {
                match &mut agent.policy {
                    PolicyNet::Gaussian(p) => {
                        load_mlp_tensors(&mut p.trunk, &mut tensors)?;
                        let log_std = tensors.next().ok_or("missing log-std tensor")?;
                        if log_std.data.len() != p.log_std.len() {
                            return Err("log-std length mismatch".into());
                        }
                        p.log_std = log_std.data;
                    }
                    PolicyNet::Categorical(p) => load_mlp_tensors(&mut p.trunk, &mut tensors)?,
                }
                load_mlp_tensors(&mut agent.value, &mut tensors)?;
                restore_norm(&mut agent.obs_norm, &mut tensors)?;
                let scale = tensors.next().ok_or("missing return-scale tensor")?;
                if scale.data.len() != 2 {
                    return Err("return-scale tensor must hold mean and std".into());
                }
                agent.ret_mean = scale.data[0];
                agent.ret_std = scale.data[1];
            }
            TrainedAgent::Dqn(agent) => {
                load_mlp_tensors(&mut agent.online, &mut tensors)?;
                agent.target = agent.online.clone();
                restore_norm(&mut agent.obs_norm, &mut tensors)?;
            }
        }
        if tensors.next().is_some() {
            return Err("trailing tensors in checkpoint".into());
        }
        Ok(())
    }
}

fn restore_norm(
    norm: &mut super::RunningNorm,
    tensors: &mut std::vec::IntoIter<Tensor>,
) -> Result<(), String> {
    let mean = tensors.next().ok_or("missing normalizer mean")?;
    let m2 = tensors.next().ok_or("missing normalizer m2")?;
    let count = tensors.next().ok_or("missing normalizer count")?;
    if mean.data.len() != m2.data.len() || count.data.len() != 1 {
        return Err("normalizer tensor shapes are inconsistent".into());
    }
    norm.restore(count.data[0] as u64, mean.data, m2.data);
    Ok(())
}
