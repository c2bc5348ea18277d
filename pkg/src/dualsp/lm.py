"""Single-layer LSTM language model used for fluency rewards.

Scores are length-normalized total log-probabilities including the EOS
position, so a uniform model over V tokens scores -log V regardless of input
length.  After training the model is frozen; reward computation never updates
it.
"""

from __future__ import annotations

from typing import Sequence

import torch
from torch import Tensor, nn

from .seq2seq import INIT_RANGE, _set_forget_bias
from .vocab import Vocabulary


class LanguageModel(nn.Module):
    def __init__(
        self,
        vocab: Vocabulary,
        d_w: int = 100,
        n_hidden: int = 200,
        seed: int = 0,
    ):
        super().__init__()
        self.vocab = vocab
        self.d_w = d_w
        self.n_hidden = n_hidden
        self.embed = nn.Embedding(len(vocab), d_w)
        self.rnn = nn.LSTM(d_w, n_hidden, batch_first=True)
        self.proj = nn.Linear(n_hidden, len(vocab))
        g = torch.Generator().manual_seed(seed)
        for p in self.parameters():
            p.data.uniform_(-INIT_RANGE, INIT_RANGE, generator=g)
        _set_forget_bias(self.rnn.bias_ih_l0, self.rnn.bias_hh_l0, n_hidden)

    def batch_log_probs(self, sequences: Sequence[Sequence[str]]) -> Tensor:
        """Total log P of each sequence: all tokens plus the final EOS, each
        conditioned on the BOS-prefixed history."""
        device = next(self.parameters()).device
        dtype = next(self.parameters()).dtype
        B = len(sequences)
        lens = [len(s) for s in sequences]
        if min(lens) < 1:
            raise ValueError("empty sequence")
        T = max(lens) + 1  # scored positions include EOS
        inp = torch.full((B, T), self.vocab.eos, dtype=torch.long, device=device)
        out = torch.full((B, T), self.vocab.eos, dtype=torch.long, device=device)
        mask = torch.zeros(B, T, dtype=torch.bool, device=device)
        for b, s in enumerate(sequences):
            ids = self.vocab.encode(s)
            inp[b, 0] = self.vocab.bos
            inp[b, 1 : len(ids) + 1] = torch.tensor(ids, device=device)
            out[b, : len(ids)] = torch.tensor(ids, device=device)
            mask[b, : len(ids) + 1] = True
        hidden, _ = self.rnn(self.embed(inp))
        logp = torch.log_softmax(self.proj(hidden), dim=-1)
        step_lp = logp.gather(2, out.unsqueeze(-1)).squeeze(-1)
        return (step_lp * mask.to(dtype)).sum(dim=-1)

    def freeze(self):
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()


def lm_score_normalized(lm: LanguageModel, tokens: Sequence[str]) -> float:
    """Log-probability per scored position (tokens plus EOS); always <= 0."""
    with torch.no_grad():
        total = lm.batch_log_probs([tokens])[0].item()
    return total / (len(tokens) + 1)


def lm_train(
    lm: LanguageModel,
    corpus: Sequence[Sequence[str]],
    epochs: int,
    lr: float = 1e-3,
    batch_size: int = 20,
    seed: int = 0,
    freeze: bool = True,
) -> list[float]:
    """Next-token MLE training; returns per-epoch mean NLL per sequence.
    The model is frozen afterwards (reward use only)."""
    if not corpus:
        raise ValueError("empty corpus")
    opt = torch.optim.Adam(lm.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)
    order = list(range(len(corpus)))
    rng = torch.Generator().manual_seed(seed)
    history: list[float] = []
    for _ in range(epochs):
        perm = torch.randperm(len(order), generator=rng).tolist()
        total_nll = 0.0
        for start in range(0, len(perm), batch_size):
            batch = [corpus[order[i]] for i in perm[start : start + batch_size]]
            opt.zero_grad()
            loss = -lm.batch_log_probs(batch).mean()
            if not torch.isfinite(loss):
                raise FloatingPointError("non-finite LM loss")
            loss.backward()
            opt.step()
            total_nll += loss.item() * len(batch)
        history.append(total_nll / len(perm))
    if freeze:
        lm.freeze()
    return history


def lm_perplexity(lm: LanguageModel, corpus: Sequence[Sequence[str]]) -> float:
    with torch.no_grad():
        total = lm.batch_log_probs(corpus).sum().item()
    positions = sum(len(s) + 1 for s in corpus)
    return float(torch.exp(torch.tensor(-total / positions)))
