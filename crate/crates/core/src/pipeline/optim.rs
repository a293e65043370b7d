use crate::encoder::{EncoderGrads, EncoderParams};
use crate::error::Result;
use crate::numkit::{AdamConfig, AdamState};

/// Adam over the three encoder parameter blocks.
#[derive(Clone, Debug)]
pub struct EncoderOptimizer {
    embed: AdamState,
    proj: AdamState,
    bias: AdamState,
    embed_buf: Vec<f32>,
}

impl EncoderOptimizer {
    pub fn new(params: &EncoderParams<f32>) -> Result<Self> {
        let cfg = AdamConfig::default();
        let n_embed = params.embed.as_slice().len();
        Ok(Self {
            embed: AdamState::new(n_embed, cfg)?,
            proj: AdamState::new(params.proj.as_slice().len(), cfg)?,
            bias: AdamState::new(params.bias.len(), cfg)?,
            embed_buf: vec![0.0; n_embed],
        })
    }

    pub fn steps(&self) -> u64 {
        self.bias.step
    }

    pub fn step(&mut self, params: &mut EncoderParams<f32>, grads: &EncoderGrads<f32>, lr: f32) -> Result<()> {
        let de = params.token_dim();
        for (&r, g) in &grads.embed_rows {
            let o = r as usize * de;
            self.embed_buf[o..o + de].copy_from_slice(g);
        }
        let res = self
            .embed
            .step("embed_table", params.embed.as_mut_slice(), &self.embed_buf, lr);
        for &r in grads.embed_rows.keys() {
            let o = r as usize * de;
            self.embed_buf[o..o + de].fill(0.0);
        }
        res?;
        self.proj
            .step("proj_weight", params.proj.as_mut_slice(), grads.proj.as_slice(), lr)?;
        self.bias.step("proj_bias", &mut params.bias, &grads.bias, lr)
    }
}
