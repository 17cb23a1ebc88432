use super::{Bound, ModelError};
use crate::autodiff::{Graph, Tensor, Var};
use crate::corpus::{to_fixed_id, Batch};

/// Lower and upper clamp applied to the generation probability.
pub const P_GEN_FLOOR: f64 = 1e-6;
/// Probability floor inside the negative log-likelihood.
pub const PROB_FLOOR: f64 = 1e-12;

/// LSTM hidden and cell state, each `1 x hidden_dim`.
#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

/// Encoder states for one article, padded to the batch length.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    /// `n x 2H`; rows at masked positions are zero.
    pub h: Var,
    /// `h * W_h`, shared by every decoder step.
    pub features: Var,
    /// Decoder initial state.
    pub init: LstmState,
    pub mask: Vec<bool>,
    pub len: usize,
}

impl EncoderOutput {
    pub fn positions(&self) -> usize {
        self.mask.len()
    }
}

/// Everything one decoder step produces.
#[derive(Clone, Copy, Debug)]
pub struct StepOutput {
    pub state: LstmState,
    pub x_t: Var,
    pub attention: Var,
    pub context: Var,
    pub p_vocab: Var,
    pub p_gen: Var,
    pub p_final: Var,
    /// Coverage for the next step: the input coverage plus this step's attention.
    pub next_coverage: Var,
}

/// Looks up embedding rows. Extended ids (`>= V`) read the UNK row.
pub fn embed(g: &mut Graph, p: &Bound, ids: &[usize]) -> Result<Var, ModelError> {
    let v = p.dims.vocab_size;
    let fixed: Vec<usize> = ids.iter().map(|&i| to_fixed_id(i, v)).collect();
    Ok(g.gather(p.embedding, &fixed)?)
}

fn affine(g: &mut Graph, x: Var, w: Var, b: Var) -> Result<Var, ModelError> {
    let xw = g.matmul(x, w)?;
    Ok(g.add(xw, b)?)
}

/// One LSTM step with gate order input, forget, cell, output.
pub fn lstm_cell(g: &mut Graph, cell: &super::Lstm, x: Var, prev: LstmState) -> Result<LstmState, ModelError> {
    let h = g.value(prev.h).cols();
    let xw = g.matmul(x, cell.w_x)?;
    let hw = g.matmul(prev.h, cell.w_h)?;
    let z = g.add(xw, hw)?;
    let z = g.add(z, cell.b)?;
    let zi = g.slice_cols(z, 0, h)?;
    let zf = g.slice_cols(z, h, 2 * h)?;
    let zg = g.slice_cols(z, 2 * h, 3 * h)?;
    let zo = g.slice_cols(z, 3 * h, 4 * h)?;
    let i = g.sigmoid(zi)?;
    let f = g.sigmoid(zf)?;
    let cand = g.tanh(zg)?;
    let o = g.sigmoid(zo)?;
    let keep = g.mul(f, prev.c)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c)?;
    let h = g.mul(o, tc)?;
    Ok(LstmState { h, c })
}

fn zero_state(g: &mut Graph, hidden: usize) -> LstmState {
    let h = g.constant(Tensor::zeros(&[1, hidden]));
    let c = g.constant(Tensor::zeros(&[1, hidden]));
    LstmState { h, c }
}

/// Bidirectional single-layer encoder over the unmasked prefix of `embedded`.
///
/// Row `i` of the output is the forward state at `i` concatenated with the
/// backward state at `i`. The decoder starts from a tanh-affine reduction of
/// the final forward and backward states.
pub fn encode(g: &mut Graph, p: &Bound, embedded: Var, mask: &[bool]) -> Result<EncoderOutput, ModelError> {
    let n = mask.len();
    if g.value(embedded).rows() != n {
        return Err(ModelError::Shape(format!(
            "embedded article has {} rows but mask has {n}",
            g.value(embedded).rows()
        )));
    }
    let len = mask.iter().take_while(|&&m| m).count();
    if len == 0 {
        return Err(ModelError::EmptyInput);
    }
    if mask[len..].iter().any(|&m| m) {
        return Err(ModelError::Shape("mask must be a prefix of real positions".into()));
    }
    let hidden = p.dims.hidden_dim;
    let rows: Vec<Var> = (0..len)
        .map(|i| g.slice_rows(embedded, i, i + 1))
        .collect::<Result<_, _>>()?;

    let mut fw = Vec::with_capacity(len);
    let mut state = zero_state(g, hidden);
    for &x in &rows {
        state = lstm_cell(g, &p.enc_fw, x, state)?;
        fw.push(state);
    }
    let mut bw = vec![state; len];
    let mut state = zero_state(g, hidden);
    for i in (0..len).rev() {
        state = lstm_cell(g, &p.enc_bw, rows[i], state)?;
        bw[i] = state;
    }

    let mut out_rows = Vec::with_capacity(n);
    for i in 0..len {
        out_rows.push(g.concat_cols(&[fw[i].h, bw[i].h])?);
    }
    if n > len {
        out_rows.push(g.constant(Tensor::zeros(&[n - len, 2 * hidden])));
    }
    let h = g.concat_rows(&out_rows)?;
    let features = g.matmul(h, p.attn_w_h)?;

    let last_h = g.concat_cols(&[fw[len - 1].h, bw[0].h])?;
    let last_c = g.concat_cols(&[fw[len - 1].c, bw[0].c])?;
    let rh = affine(g, last_h, p.reduce_w_h, p.reduce_b_h)?;
    let rc = affine(g, last_c, p.reduce_w_c, p.reduce_b_c)?;
    let init = LstmState {
        h: g.tanh(rh)?,
        c: g.tanh(rc)?,
    };
    Ok(EncoderOutput {
        h,
        features,
        init,
        mask: mask.to_vec(),
        len,
    })
}

/// Masked attention `softmax(v^T tanh(W_h h_i + W_s s_t [+ w_c c_i] + b))` as a `1 x n` row.
pub fn attention(
    g: &mut Graph,
    p: &Bound,
    enc: &EncoderOutput,
    s_t: Var,
    coverage: Var,
    use_coverage: bool,
) -> Result<Var, ModelError> {
    let n = enc.positions();
    let s_feat = g.matmul(s_t, p.attn_w_s)?;
    let mut pre = g.add(enc.features, s_feat)?;
    if use_coverage {
        let c_col = g.reshape(coverage, &[n, 1])?;
        let c_feat = g.matmul(c_col, p.attn_w_c)?;
        pre = g.add(pre, c_feat)?;
    }
    let pre = g.add(pre, p.attn_b)?;
    let act = g.tanh(pre)?;
    let e = g.matmul(act, p.attn_v)?;
    let e = g.reshape(e, &[1, n])?;
    Ok(g.masked_softmax(e, &enc.mask)?)
}

/// Attention-weighted sum of encoder states, `1 x 2H`.
pub fn context(g: &mut Graph, attention: Var, h: Var) -> Result<Var, ModelError> {
    Ok(g.matmul(attention, h)?)
}

/// `softmax(V'(V[s_t, h*] + b) + b')` over the fixed vocabulary.
pub fn vocab_dist(g: &mut Graph, p: &Bound, s_t: Var, h_star: Var) -> Result<Var, ModelError> {
    let joined = g.concat_cols(&[s_t, h_star])?;
    let hidden = affine(g, joined, p.vocab_w1, p.vocab_b1)?;
    let logits = affine(g, hidden, p.vocab_w2, p.vocab_b2)?;
    Ok(g.softmax(logits)?)
}

/// `sigmoid(w_h* . h* + w_s . s_t + w_x . x_t + b)`, clamped into `[1e-6, 1 - 1e-6]`.
pub fn gen_prob(g: &mut Graph, p: &Bound, h_star: Var, s_t: Var, x_t: Var) -> Result<Var, ModelError> {
    let a = g.matmul(h_star, p.gen_w_hstar)?;
    let b = g.matmul(s_t, p.gen_w_s)?;
    let c = g.matmul(x_t, p.gen_w_x)?;
    let z = g.add(a, b)?;
    let z = g.add(z, c)?;
    let z = g.add(z, p.gen_b)?;
    let s = g.sigmoid(z)?;
    Ok(g.clamp(s, P_GEN_FLOOR, 1.0 - P_GEN_FLOOR)?)
}

/// Mixture over the extended vocabulary:
/// `p_gen * [P_vocab, 0...] + (1 - p_gen) * scatter(attention onto source ids)`.
pub fn final_dist(
    g: &mut Graph,
    p_gen: Var,
    p_vocab: Var,
    attention: Var,
    source_extended_ids: &[usize],
    n_oov: usize,
) -> Result<Var, ModelError> {
    let size = g.value(p_vocab).cols() + n_oov;
    let gen = if n_oov > 0 { g.pad_cols(p_vocab, n_oov)? } else { p_vocab };
    let gen = g.scale_by(gen, p_gen)?;
    let copy = g.scatter_add(attention, source_extended_ids, size)?;
    let p_copy = g.affine(p_gen, -1.0, 1.0)?;
    let copy = g.scale_by(copy, p_copy)?;
    Ok(g.add(gen, copy)?)
}

/// `-log max(P(target), 1e-12)`, plus `lambda * sum_i min(a_i, c_i)` with coverage.
pub fn step_loss(
    g: &mut Graph,
    p_final: Var,
    target: usize,
    attention: Var,
    coverage: Var,
    lambda: f64,
    use_coverage: bool,
) -> Result<Var, ModelError> {
    let size = g.value(p_final).numel();
    if target >= size {
        return Err(ModelError::Shape(format!(
            "target id {target} outside distribution of size {size}"
        )));
    }
    let prob = g.index(p_final, target)?;
    let prob = g.clamp(prob, PROB_FLOOR, f64::MAX)?;
    let log_p = g.log(prob)?;
    let nll = g.affine(log_p, -1.0, 0.0)?;
    if !use_coverage {
        return Ok(nll);
    }
    let overlap = coverage_loss(g, attention, coverage)?;
    let weighted = g.affine(overlap, lambda, 0.0)?;
    Ok(g.add(nll, weighted)?)
}

/// `sum_i min(a_i, c_i)`.
pub fn coverage_loss(g: &mut Graph, attention: Var, coverage: Var) -> Result<Var, ModelError> {
    let m = g.min(attention, coverage)?;
    Ok(g.sum(m)?)
}

/// Decoder step with an already-embedded input `x_t` (`1 x E`).
pub fn decoder_step_embedded(
    g: &mut Graph,
    p: &Bound,
    prev: LstmState,
    x_t: Var,
    enc: &EncoderOutput,
    source_extended_ids: &[usize],
    n_oov: usize,
    coverage: Var,
    use_coverage: bool,
) -> Result<StepOutput, ModelError> {
    let state = lstm_cell(g, &p.dec, x_t, prev)?;
    let attention = attention(g, p, enc, state.h, coverage, use_coverage)?;
    let ctx = context(g, attention, enc.h)?;
    let p_vocab = vocab_dist(g, p, state.h, ctx)?;
    let p_gen = gen_prob(g, p, ctx, state.h, x_t)?;
    let p_final = final_dist(g, p_gen, p_vocab, attention, source_extended_ids, n_oov)?;
    let next_coverage = g.add(coverage, attention)?;
    Ok(StepOutput {
        state,
        x_t,
        attention,
        context: ctx,
        p_vocab,
        p_gen,
        p_final,
        next_coverage,
    })
}

/// One decoder step fed the previous token `input_id` (extended ids read UNK).
#[allow(clippy::too_many_arguments)]
pub fn decoder_step(
    g: &mut Graph,
    p: &Bound,
    prev: LstmState,
    input_id: usize,
    enc: &EncoderOutput,
    source_extended_ids: &[usize],
    n_oov: usize,
    coverage: Var,
    use_coverage: bool,
) -> Result<StepOutput, ModelError> {
    let x_t = embed(g, p, &[input_id])?;
    decoder_step_embedded(g, p, prev, x_t, enc, source_extended_ids, n_oov, coverage, use_coverage)
}

/// Zero coverage for an encoder output, `1 x n`.
pub fn initial_coverage(g: &mut Graph, enc: &EncoderOutput) -> Var {
    g.constant(Tensor::zeros(&[1, enc.positions()]))
}

/// Encodes example `b` of `batch`.
pub fn encode_batch_item(g: &mut Graph, p: &Bound, batch: &Batch, b: usize) -> Result<EncoderOutput, ModelError> {
    let mask: Vec<bool> = batch.article_mask[b].iter().map(|&m| m == 1).collect();
    let embedded = embed(g, p, &batch.article_ids[b])?;
    encode(g, p, embedded, &mask)
}

/// Teacher-forced loss of one batch item: the mean of its unmasked step losses.
pub fn example_loss(
    g: &mut Graph,
    p: &Bound,
    batch: &Batch,
    b: usize,
    lambda: f64,
    use_coverage: bool,
) -> Result<Var, ModelError> {
    let steps = batch.summary_mask[b].iter().filter(|&&m| m == 1).count();
    if steps == 0 {
        return Err(ModelError::EmptyTarget);
    }
    let enc = encode_batch_item(g, p, batch, b)?;
    let inputs = embed(g, p, &batch.summary_input_ids[b][..steps])?;
    let n_oov = batch.oov_words[b].len();
    let src = &batch.article_extended_ids[b];
    let mut state = enc.init;
    let mut coverage = initial_coverage(g, &enc);
    let mut losses = Vec::with_capacity(steps);
    for t in 0..steps {
        let x_t = g.slice_rows(inputs, t, t + 1)?;
        let out = decoder_step_embedded(g, p, state, x_t, &enc, src, n_oov, coverage, use_coverage)?;
        let target = batch.summary_target_ids[b][t];
        losses.push(step_loss(g, out.p_final, target, out.attention, coverage, lambda, use_coverage)?);
        state = out.state;
        coverage = out.next_coverage;
    }
    let stacked = g.concat_cols(&losses)?;
    Ok(g.mean(stacked)?)
}

/// Mean over the batch of per-example mean step losses.
pub fn sequence_loss(g: &mut Graph, p: &Bound, batch: &Batch, lambda: f64, use_coverage: bool) -> Result<Var, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyTarget);
    }
    let per_example = (0..batch.len())
        .map(|b| example_loss(g, p, batch, b, lambda, use_coverage))
        .collect::<Result<Vec<_>, _>>()?;
    let stacked = g.concat_cols(&per_example)?;
    Ok(g.mean(stacked)?)
}
