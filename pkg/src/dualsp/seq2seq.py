"""Attention-based encoder-decoder with an optional copy mechanism.

One instance models a single direction (query->logical form or the reverse).
The encoder is a single-layer bidirectional LSTM; the decoder is a single
LSTM cell whose hidden state is initialized from the backward encoder state
at the first position.  At each step the decoder state is updated from the
previous output token first, then attends over the encoder states, and the
output distribution is a softmax over the target vocabulary, optionally mixed
with a copy distribution over source spans that name knowledge-base entities.

The copy distribution puts, on each entity token, the total attention mass of
all source spans mapping to it; since only matching spans carry mass, it is
renormalized over matched entities, and the generation/copy gate is forced to
pure generation on steps where the source contains no entity span at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import torch
from torch import Tensor, nn

from .lexicon import EntityLexicon, match_spans
from .vocab import UNK_COPY, Vocabulary

INIT_RANGE = 0.2


@dataclass
class Hypothesis:
    tokens: list[str]          # includes the terminating EOS token
    log_prob: float
    finished: bool


def _init_uniform(module: nn.Module, generator: torch.Generator):
    for p in module.parameters():
        p.data.uniform_(-INIT_RANGE, INIT_RANGE, generator=generator)


def _set_forget_bias(bias_ih: Tensor, bias_hh: Tensor, hidden: int):
    # gate order in torch LSTM weights: input, forget, cell, output
    bias_ih.data[hidden : 2 * hidden] = 1.0
    bias_hh.data[hidden : 2 * hidden] = 0.0


class Seq2SeqModel(nn.Module):
    def __init__(
        self,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        d_w: int = 100,
        n_hidden: int = 200,
        use_copy: bool = False,
        lexicon: Optional[EntityLexicon] = None,
        seed: int = 0,
    ):
        super().__init__()
        if use_copy and lexicon is None:
            raise ValueError("use_copy requires a lexicon")
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.d_w = d_w
        self.n_hidden = n_hidden
        self.use_copy = use_copy
        self.lexicon = lexicon

        self.src_embed = nn.Embedding(len(src_vocab), d_w)
        self.tgt_embed = nn.Embedding(len(tgt_vocab), d_w)
        self.encoder = nn.LSTM(d_w, n_hidden, bidirectional=True, batch_first=True)
        self.decoder_cell = nn.LSTMCell(d_w, n_hidden)
        self.attn_src = nn.Linear(2 * n_hidden, n_hidden, bias=False)
        self.attn_state = nn.Linear(n_hidden, n_hidden, bias=True)
        self.attn_score = nn.Linear(n_hidden, 1, bias=False)
        self.out_proj = nn.Linear(3 * n_hidden, len(tgt_vocab))
        if use_copy:
            self.copy_gate = nn.Linear(3 * n_hidden + d_w, 1)

        g = torch.Generator().manual_seed(seed)
        _init_uniform(self, g)
        _set_forget_bias(self.encoder.bias_ih_l0, self.encoder.bias_hh_l0, n_hidden)
        _set_forget_bias(
            self.encoder.bias_ih_l0_reverse, self.encoder.bias_hh_l0_reverse, n_hidden
        )
        _set_forget_bias(self.decoder_cell.bias_ih, self.decoder_cell.bias_hh, n_hidden)

    @property
    def device_dtype(self):
        p = next(self.parameters())
        return p.device, p.dtype

    # --- encoding ------------------------------------------------------------

    def encode_batch(self, sources: Sequence[Sequence[str]]):
        """Returns (H, mask, h0, c0).  H is (B, L, 2n) with padded positions
        zeroed in the mask; the decoder start state is the backward encoder
        state at the first source position."""
        device, dtype = self.device_dtype
        lengths = [len(s) for s in sources]
        if min(lengths) < 1:
            raise ValueError("empty source sequence")
        max_len = max(lengths)
        ids = torch.zeros(len(sources), max_len, dtype=torch.long, device=device)
        mask = torch.zeros(len(sources), max_len, dtype=torch.bool, device=device)
        for b, s in enumerate(sources):
            ids[b, : len(s)] = torch.tensor(self.src_vocab.encode(s), device=device)
            mask[b, : len(s)] = True
        emb = self.src_embed(ids)
        packed = nn.utils.rnn.pack_padded_sequence(
            emb, torch.tensor(lengths), batch_first=True, enforce_sorted=False
        )
        out, (h_n, c_n) = self.encoder(packed)
        H, _ = nn.utils.rnn.pad_packed_sequence(out, batch_first=True)
        # layer-direction dim: index 1 is the backward direction; its final
        # state is the backward state at source position 1
        return H, mask, h_n[1], c_n[1]

    def attend(self, s_t: Tensor, H: Tensor, mask: Tensor):
        """Additive attention: scores v^T tanh(W1 h_i + W2 s_t + b); returns
        (weights (B, L), context (B, 2n))."""
        scores = self.attn_score(
            torch.tanh(self.attn_src(H) + self.attn_state(s_t).unsqueeze(1))
        ).squeeze(-1)
        scores = scores.masked_fill(~mask, float("-inf"))
        a = torch.softmax(scores, dim=-1)
        c = torch.bmm(a.unsqueeze(1), H).squeeze(1)
        return a, c

    # --- copy support --------------------------------------------------------

    def copy_matrix(self, sources: Sequence[Sequence[str]], max_len: int) -> Tensor:
        """(B, V, L) matrix M with M[b, w, k] = number of entity spans of
        source b mapping to target token w that cover position k.  Entity
        tokens absent from the target vocabulary fall into the <unk-copy>
        bucket (or <unk> if the vocabulary has no such token)."""
        device, dtype = self.device_dtype
        V = len(self.tgt_vocab)
        M = torch.zeros(len(sources), V, max_len, dtype=dtype, device=device)
        bucket = self.tgt_vocab.index.get(UNK_COPY, self.tgt_vocab.unk)
        for b, words in enumerate(sources):
            for i, j, token in match_spans(self.lexicon, words):
                w = self.tgt_vocab.index.get(token, bucket)
                M[b, w, i : j + 1] += 1.0
        return M

    def decode_step(
        self,
        prev_ids: Tensor,
        state: tuple[Tensor, Tensor],
        H: Tensor,
        mask: Tensor,
        copy_M: Optional[Tensor],
    ):
        """One decoder step for a batch.  Returns (P (B, V), new state, a)."""
        prev_emb = self.tgt_embed(prev_ids)
        s_t, cell = self.decoder_cell(prev_emb, state)
        a, c_t = self.attend(s_t, H, mask)
        feats = torch.cat([s_t, c_t], dim=-1)
        p_gen = torch.softmax(self.out_proj(feats), dim=-1)
        if not self.use_copy:
            return p_gen, (s_t, cell), a
        assert copy_M is not None
        raw = torch.bmm(copy_M, a.unsqueeze(-1)).squeeze(-1)  # (B, V)
        total = raw.sum(dim=-1, keepdim=True)
        has_match = total.squeeze(-1) > 0
        p_copy = raw / total.clamp_min(1e-30)
        g = torch.sigmoid(
            self.copy_gate(torch.cat([feats, prev_emb], dim=-1))
        ).squeeze(-1)
        g = torch.where(has_match, g, torch.ones_like(g))
        P = g.unsqueeze(-1) * p_gen + (1.0 - g).unsqueeze(-1) * p_copy
        return P, (s_t, cell), a

    # --- scoring and training ------------------------------------------------

    def batch_log_probs(
        self,
        sources: Sequence[Sequence[str]],
        targets: Sequence[Sequence[str]],
    ) -> Tensor:
        """Teacher-forced log P(y|x) for each pair; every target must end with
        the EOS token.  Padding never leaks across examples."""
        eos = self.tgt_vocab.tokens[self.tgt_vocab.eos]
        for y in targets:
            if not y or y[-1] != eos:
                raise ValueError("target must end with EOS")
        device, dtype = self.device_dtype
        H, mask, h0, c0 = self.encode_batch(sources)
        copy_M = self.copy_matrix(sources, H.shape[1]) if self.use_copy else None

        B = len(sources)
        tgt_lens = [len(y) for y in targets]
        T = max(tgt_lens)
        tgt_ids = torch.zeros(B, T, dtype=torch.long, device=device)
        tgt_mask = torch.zeros(B, T, dtype=torch.bool, device=device)
        for b, y in enumerate(targets):
            tgt_ids[b, : len(y)] = torch.tensor(self.tgt_vocab.encode(y), device=device)
            tgt_mask[b, : len(y)] = True

        prev = torch.full((B,), self.tgt_vocab.bos, dtype=torch.long, device=device)
        state = (h0, c0)
        total = torch.zeros(B, dtype=dtype, device=device)
        for t in range(T):
            P, state, _ = self.decode_step(prev, state, H, mask, copy_M)
            tiny = torch.finfo(dtype).tiny
            step_lp = torch.log(
                P.gather(1, tgt_ids[:, t : t + 1]).squeeze(-1).clamp_min(tiny)
            )
            total = total + step_lp * tgt_mask[:, t].to(dtype)
            prev = tgt_ids[:, t]
        return total

    def sequence_log_prob(
        self, source: Sequence[str], target: Sequence[str]
    ) -> Tensor:
        return self.batch_log_probs([source], [target])[0]

    # --- decoding ------------------------------------------------------------

    def beam_search(
        self, source: Sequence[str], k: int, max_len: int
    ) -> list[Hypothesis]:
        """Standard beam search over total log-probability.  Hypotheses that
        emit EOS retire; at max_len EOS is forced.  Ties break toward lower
        token indices.  Returns up to k finished hypotheses, best first."""
        if k < 1 or max_len < 1:
            raise ValueError("k and max_len must be >= 1")
        eos = self.tgt_vocab.eos
        with torch.no_grad():
            H, mask, h0, c0 = self.encode_batch([source])
            copy_M = self.copy_matrix([source], H.shape[1]) if self.use_copy else None
            # alive: (token ids, log prob, state)
            alive: list[tuple[tuple[int, ...], float, tuple[Tensor, Tensor]]] = [
                ((), 0.0, (h0, c0))
            ]
            finished: list[tuple[float, tuple[int, ...]]] = []
            for step in range(max_len + 1):
                if not alive:
                    break
                prev = torch.tensor(
                    [t[-1] if t else self.tgt_vocab.bos for t, _, _ in alive],
                    dtype=torch.long,
                )
                h = torch.cat([s[0] for _, _, s in alive], dim=0)
                c = torch.cat([s[1] for _, _, s in alive], dim=0)
                P, (h, c), _ = self.decode_step(
                    prev,
                    (h, c),
                    H.expand(len(alive), -1, -1),
                    mask.expand(len(alive), -1),
                    copy_M.expand(len(alive), -1, -1) if copy_M is not None else None,
                )
                logP = torch.log(P.clamp_min(torch.finfo(P.dtype).tiny))
                if step == max_len:
                    for b, (toks, lp, _) in enumerate(alive):
                        finished.append((lp + logP[b, eos].item(), toks + (eos,)))
                    break
                cands = []
                for b, (toks, lp, _) in enumerate(alive):
                    for w in range(logP.shape[1]):
                        cands.append((lp + logP[b, w].item(), toks + (w,), b))
                cands.sort(key=lambda x: (-x[0], x[1]))
                next_alive = []
                for lp, toks, b in cands[:k]:
                    if toks[-1] == eos:
                        finished.append((lp, toks))
                    else:
                        next_alive.append(
                            (toks, lp, (h[b : b + 1], c[b : b + 1]))
                        )
                alive = next_alive
        finished.sort(key=lambda x: (-x[0], x[1]))
        return [
            Hypothesis(self.tgt_vocab.decode(toks), lp, True)
            for lp, toks in finished[:k]
        ]

    def greedy_decode(self, source: Sequence[str], max_len: int) -> list[str]:
        hyp = self.beam_search(source, k=1, max_len=max_len)[0]
        return hyp.tokens

    def greedy_decode_batch(
        self, sources: Sequence[Sequence[str]], max_len: int
    ) -> list[list[str]]:
        """Batched greedy decoding; per-example output equals greedy_decode."""
        if not sources:
            return []
        eos = self.tgt_vocab.eos
        device, _ = self.device_dtype
        with torch.no_grad():
            H, mask, h0, c0 = self.encode_batch(sources)
            copy_M = self.copy_matrix(sources, H.shape[1]) if self.use_copy else None
            B = len(sources)
            state = (h0, c0)
            prev = torch.full((B,), self.tgt_vocab.bos, dtype=torch.long, device=device)
            done = torch.zeros(B, dtype=torch.bool, device=device)
            outputs: list[list[int]] = [[] for _ in range(B)]
            for _ in range(max_len):
                P, state, _ = self.decode_step(prev, state, H, mask, copy_M)
                w = P.argmax(dim=-1)
                for b in range(B):
                    if not done[b]:
                        outputs[b].append(int(w[b]))
                done |= w == eos
                if bool(done.all()):
                    break
                prev = w
            for b in range(B):
                if not outputs[b] or outputs[b][-1] != eos:
                    outputs[b].append(eos)
        return [self.tgt_vocab.decode(toks) for toks in outputs]

    def sample_sequence(
        self, source: Sequence[str], max_len: int, generator: torch.Generator
    ) -> list[str]:
        """Ancestral sampling from the per-step distributions, with EOS forced
        at max_len; spans the same sequence space as beam/exhaustive search."""
        eos = self.tgt_vocab.eos
        with torch.no_grad():
            H, mask, h0, c0 = self.encode_batch([source])
            copy_M = self.copy_matrix([source], H.shape[1]) if self.use_copy else None
            state = (h0, c0)
            prev = torch.tensor([self.tgt_vocab.bos], dtype=torch.long)
            tokens: list[int] = []
            for step in range(max_len):
                P, state, _ = self.decode_step(prev, state, H, mask, copy_M)
                w = torch.multinomial(P[0], 1, generator=generator).item()
                tokens.append(w)
                if w == eos:
                    break
                prev = torch.tensor([w], dtype=torch.long)
            if not tokens or tokens[-1] != eos:
                tokens.append(eos)
        return self.tgt_vocab.decode(tokens)


def mle_train_step(
    model: Seq2SeqModel,
    optimizer: torch.optim.Optimizer,
    batch: Sequence[tuple[Sequence[str], Sequence[str]]],
    loss_weight: float = 1.0,
) -> float:
    """One Adam step on -loss_weight * mean log P(y|x); returns the loss."""
    if not batch:
        raise ValueError("empty batch")
    sources = [x for x, _ in batch]
    targets = [y for _, y in batch]
    optimizer.zero_grad()
    loss = -loss_weight * model.batch_log_probs(sources, targets).mean()
    if not torch.isfinite(loss):
        raise FloatingPointError("non-finite MLE loss")
    loss.backward()
    optimizer.step()
    return loss.item()


def make_adam(model: nn.Module, lr: float = 1e-3) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)


def gradient_ascent_step(
    model: nn.Module, objective: Tensor, lr: float, max_grad_norm: float = 5.0
):
    """theta += lr * d(objective)/d(theta); plain ascent as in the dual loops.

    Gradients are norm-clipped before the step: raw log-prob rewards can make
    the policy-gradient objective arbitrarily large and a handful of unclipped
    updates is enough to push an LSTM into NaN territory.
    """
    model.zero_grad()
    objective.backward()
    with torch.no_grad():
        if max_grad_norm is not None:
            nn.utils.clip_grad_norm_(model.parameters(), max_grad_norm)
        for p in model.parameters():
            if p.grad is not None:
                p.add_(p.grad, alpha=lr)
    model.zero_grad()
