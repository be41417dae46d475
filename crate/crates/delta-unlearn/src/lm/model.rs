use crate::autodiff::{NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::error::{Error, Result};
use crate::lm::config::LMConfig;
use crate::rng::Rng;

/// Which logit rows the forward pass should materialize. Computing the
/// vocabulary projection only where it is needed is the main inference
/// cost saving at generation and scoring time.
#[derive(Debug, Clone)]
pub enum RowSel {
    All,
    Last,
    Rows(Vec<usize>),
}

impl RowSel {
    pub fn resolve(&self, seq_len: usize) -> Vec<usize> {
        match self {
            RowSel::All => (0..seq_len).collect(),
            RowSel::Last => vec![seq_len - 1],
            RowSel::Rows(r) => r.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct LayerIds {
    ln1_g: ParamId,
    ln1_b: ParamId,
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
    ln2_g: ParamId,
    ln2_b: ParamId,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone)]
struct Layout {
    tok_emb: ParamId,
    pos_emb: ParamId,
    layers: Vec<LayerIds>,
    ln_f_g: ParamId,
    ln_f_b: ParamId,
    head: ParamId,
}

/// Decoder-only transformer: learned token + position embeddings,
/// pre-norm blocks (attention, GELU MLP), final norm, linear head.
#[derive(Debug, Clone)]
pub struct LanguageModel {
    pub config: LMConfig,
    pub params: ParamStore,
    pub frozen: bool,
    layout: Layout,
}

const INIT_STD: f64 = 0.02;

impl LanguageModel {
    pub fn init(config: LMConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let mut params = ParamStore::new();
        let tok_emb = params.add(
            "tok_emb",
            Tensor::randn(vec![config.vocab_size, d], INIT_STD, rng),
        );
        let pos_emb = params.add(
            "pos_emb",
            Tensor::randn(vec![config.max_seq_len, d], INIT_STD, rng),
        );
        let mut layers = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            let ones = Tensor::new(vec![d], vec![1.0; d])?;
            let layer = LayerIds {
                ln1_g: params.add(&format!("layer{i}.ln1.g"), ones.clone()),
                ln1_b: params.add(&format!("layer{i}.ln1.b"), Tensor::zeros(vec![d])),
                wq: params.add(
                    &format!("layer{i}.attn.wq"),
                    Tensor::randn(vec![d, d], INIT_STD, rng),
                ),
                wk: params.add(
                    &format!("layer{i}.attn.wk"),
                    Tensor::randn(vec![d, d], INIT_STD, rng),
                ),
                wv: params.add(
                    &format!("layer{i}.attn.wv"),
                    Tensor::randn(vec![d, d], INIT_STD, rng),
                ),
                wo: params.add(
                    &format!("layer{i}.attn.wo"),
                    Tensor::randn(vec![d, d], INIT_STD, rng),
                ),
                ln2_g: params.add(&format!("layer{i}.ln2.g"), ones),
                ln2_b: params.add(&format!("layer{i}.ln2.b"), Tensor::zeros(vec![d])),
                w1: params.add(
                    &format!("layer{i}.mlp.w1"),
                    Tensor::randn(vec![d, config.d_ff], INIT_STD, rng),
                ),
                b1: params.add(&format!("layer{i}.mlp.b1"), Tensor::zeros(vec![config.d_ff])),
                w2: params.add(
                    &format!("layer{i}.mlp.w2"),
                    Tensor::randn(vec![config.d_ff, d], INIT_STD, rng),
                ),
                b2: params.add(&format!("layer{i}.mlp.b2"), Tensor::zeros(vec![d])),
            };
            layers.push(layer);
        }
        let ln_f_g = params.add("ln_f.g", Tensor::new(vec![d], vec![1.0; d])?);
        let ln_f_b = params.add("ln_f.b", Tensor::zeros(vec![d]));
        let head = params.add(
            "head",
            Tensor::randn(vec![d, config.vocab_size], INIT_STD, rng),
        );
        Ok(LanguageModel {
            config,
            params,
            frozen: false,
            layout: Layout {
                tok_emb,
                pos_emb,
                layers,
                ln_f_g,
                ln_f_b,
                head,
            },
        })
    }

    /// Reconstruct from a parameter store with the canonical naming
    /// scheme (checkpoint loading).
    pub fn from_params(config: LMConfig, params: ParamStore, frozen: bool) -> Result<Self> {
        config.validate()?;
        let need = |name: &str| {
            params
                .id(name)
                .ok_or_else(|| Error::Format(format!("checkpoint missing parameter {name}")))
        };
        let mut layers = Vec::with_capacity(config.n_layers);
        for i in 0..config.n_layers {
            layers.push(LayerIds {
                ln1_g: need(&format!("layer{i}.ln1.g"))?,
                ln1_b: need(&format!("layer{i}.ln1.b"))?,
                wq: need(&format!("layer{i}.attn.wq"))?,
                wk: need(&format!("layer{i}.attn.wk"))?,
                wv: need(&format!("layer{i}.attn.wv"))?,
                wo: need(&format!("layer{i}.attn.wo"))?,
                ln2_g: need(&format!("layer{i}.ln2.g"))?,
                ln2_b: need(&format!("layer{i}.ln2.b"))?,
                w1: need(&format!("layer{i}.mlp.w1"))?,
                b1: need(&format!("layer{i}.mlp.b1"))?,
                w2: need(&format!("layer{i}.mlp.w2"))?,
                b2: need(&format!("layer{i}.mlp.b2"))?,
            });
        }
        let layout = Layout {
            tok_emb: need("tok_emb")?,
            pos_emb: need("pos_emb")?,
            layers,
            ln_f_g: need("ln_f.g")?,
            ln_f_b: need("ln_f.b")?,
            head: need("head")?,
        };
        Ok(LanguageModel {
            config,
            params,
            frozen,
            layout,
        })
    }

    /// Build the forward graph on a tape created over `self.params`.
    /// Returns the logits node of shape [selected rows, vocab]; row t
    /// holds next-token logits conditioned on ids[0..=t].
    pub fn forward_graph(&self, tape: &mut Tape, ids: &[u32], rows: &RowSel) -> Result<NodeId> {
        if ids.is_empty() {
            return Err(Error::Contract("forward on empty sequence".into()));
        }
        if ids.len() > self.config.max_seq_len {
            return Err(Error::Dimension(format!(
                "sequence length {} exceeds max_seq_len {}",
                ids.len(),
                self.config.max_seq_len
            )));
        }
        let l = &self.layout;
        let tok = tape.param(l.tok_emb);
        let pos = tape.param(l.pos_emb);
        let mut x = tape.embed(tok, pos, ids)?;
        for layer in &l.layers {
            let g1 = tape.param(layer.ln1_g);
            let b1 = tape.param(layer.ln1_b);
            let normed = tape.layer_norm(x, g1, b1)?;
            let wq = tape.param(layer.wq);
            let wk = tape.param(layer.wk);
            let wv = tape.param(layer.wv);
            let q = tape.matmul(normed, wq)?;
            let k = tape.matmul(normed, wk)?;
            let v = tape.matmul(normed, wv)?;
            let att = tape.causal_attention(q, k, v, self.config.n_heads)?;
            let wo = tape.param(layer.wo);
            let att = tape.matmul(att, wo)?;
            x = tape.add(x, att)?;

            let g2 = tape.param(layer.ln2_g);
            let b2n = tape.param(layer.ln2_b);
            let normed2 = tape.layer_norm(x, g2, b2n)?;
            let w1 = tape.param(layer.w1);
            let bb1 = tape.param(layer.b1);
            let h = tape.matmul(normed2, w1)?;
            let h = tape.add_row_broadcast(h, bb1)?;
            let h = tape.gelu(h);
            let w2 = tape.param(layer.w2);
            let bb2 = tape.param(layer.b2);
            let h = tape.matmul(h, w2)?;
            let h = tape.add_row_broadcast(h, bb2)?;
            x = tape.add(x, h)?;
        }
        let gf = tape.param(l.ln_f_g);
        let bf = tape.param(l.ln_f_b);
        let x = tape.layer_norm(x, gf, bf)?;
        let selected = tape.select_rows(x, &rows.resolve(ids.len()))?;
        let head = tape.param(l.head);
        tape.matmul(selected, head)
    }

    /// No-grad forward returning materialized logits.
    pub fn logits_rows(&self, ids: &[u32], rows: &RowSel) -> Result<Tensor> {
        let mut tape = Tape::new(&self.params, false);
        let node = self.forward_graph(&mut tape, ids, rows)?;
        Ok(tape.value(node).clone())
    }

    pub fn param_count(&self) -> usize {
        self.params.num_values()
    }
}
