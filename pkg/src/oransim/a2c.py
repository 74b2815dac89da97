"""Advantage actor-critic learning core.

Small dense networks with hand-rolled backprop, a softmax policy head,
a scalar value head, and the one-step TD update rules used by both the
RBG scheduler agent and the placement agent. Everything is numpy
float64 and deterministic for a given RNG.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericsError(RuntimeError):
    """Raised when a gradient or parameter turns non-finite; the run aborts."""


def _init_matrix(rng, fan_out, fan_in):
    # uniform in +/- 1/sqrt(fan_in): scale-stable, reproducible from the run seed
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


class FeedForwardNet:
    """Fully connected net: tanh hidden layers, identity or softmax output.

    Weights are (out, in) matrices. `forward` returns the post-activation
    output plus a cache that `backward` consumes. Gradients are returned
    as a list of (dW, db) pairs, one per layer, matching `weights`/`biases`.
    """

    def __init__(self, layer_dims, rng=None, hidden_activation="tanh",
                 output_activation="identity", zero_init=False):
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ValueError(f"bad layer_dims {layer_dims}")
        if hidden_activation not in ("tanh", "relu", "identity"):
            raise ValueError(f"unknown hidden activation {hidden_activation!r}")
        if output_activation not in ("identity", "softmax"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.layer_dims = list(layer_dims)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            if zero_init or rng is None:
                self.weights.append(np.zeros((fan_out, fan_in)))
            else:
                self.weights.append(_init_matrix(rng, fan_out, fan_in))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    def num_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def _act(self, z):
        if self.hidden_activation == "tanh":
            return np.tanh(z)
        if self.hidden_activation == "relu":
            return np.maximum(z, 0.0)
        return z

    def _act_grad(self, z, a):
        if self.hidden_activation == "tanh":
            return 1.0 - a * a
        if self.hidden_activation == "relu":
            return np.where(z > 0.0, 1.0, 0.0)
        return np.ones_like(z)

    def forward(self, x):
        """Run the net on a 1-D input; returns (output, cache)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise ValueError(
                f"input shape {x.shape} does not match input dim {self.input_dim}")
        activations = [x]    # post-activation per layer, [0] is the input
        pre_acts = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = w @ h
            z += b
            pre_acts.append(z)
            h = z if i == last else self._act(z)
            activations.append(h)
        logits = h
        if self.output_activation == "softmax":
            out = softmax(logits)
        else:
            out = logits
        cache = (activations, pre_acts, logits, out)
        return out, cache

    def backward(self, cache, grad_output):
        """Parameter gradients of dot(output, grad_output).

        `grad_output` is taken w.r.t. the post-activation output; for a
        softmax head the softmax Jacobian is applied here.
        """
        _, _, _, out = cache
        grad_output = np.asarray(grad_output, dtype=np.float64)
        if self.output_activation == "softmax":
            # J^T v for the softmax Jacobian: p*(v - <p,v>)
            grad_logits = out * (grad_output - np.dot(out, grad_output))
        else:
            grad_logits = grad_output
        return self.backward_from_logits(cache, grad_logits)

    def backward_from_logits(self, cache, grad_logits):
        """Parameter gradients given the gradient at the final linear layer.

        Used directly for log-softmax policy gradients, where the logit
        gradient (onehot - probs) is known in closed form and numerically
        safer than routing through the Jacobian.
        """
        activations, pre_acts, _, _ = cache
        grads = [None] * len(self.weights)
        delta = np.array(grad_logits, dtype=np.float64)
        for i in range(len(self.weights) - 1, -1, -1):
            grads[i] = (delta[:, None] * activations[i][None, :], delta)
            if i > 0:
                delta = self.weights[i].T @ delta
                delta *= self._act_grad(pre_acts[i - 1], activations[i])
        return grads

    def apply_step(self, grads, lr, clip_norm=None):
        """Ascend along `grads`: clip their global L2 norm, then add lr * grads.

        `grads` must be the full update direction (any TD-error factor
        already folded in); the clip caps that direction before the
        learning rate scales it. Raises NumericsError on non-finite steps.
        """
        # the squared norm doubles as the finiteness gate: any nan/inf
        # entry poisons the sum
        sq = 0.0
        for dw, db in grads:
            flat = dw.ravel()
            sq += flat @ flat
            sq += db @ db
        if not np.isfinite(sq):
            raise NumericsError("non-finite gradient; aborting run")
        scale = lr
        if clip_norm is not None and clip_norm > 0.0:
            norm = np.sqrt(sq)
            if norm > clip_norm:
                scale = lr * (clip_norm / norm)
        for (w, b), (dw, db) in zip(zip(self.weights, self.biases), grads):
            w += scale * dw
            b += scale * db

    def step_from_logits(self, cache, grad_logits, lr, clip_norm=None):
        """Fused backward + clipped ascent along the log-space gradient.

        Equivalent to backward_from_logits followed by apply_step, but the
        weight gradients are never materialized: the global norm uses
        ||outer(d, a)||_F = ||d||*||a|| and each layer gets a scaled
        rank-1 update. Saves two full passes over the weight matrices.
        """
        activations, pre_acts, _, _ = cache
        deltas = [None] * len(self.weights)
        delta = np.asarray(grad_logits, dtype=np.float64)
        sq = 0.0
        for i in range(len(self.weights) - 1, -1, -1):
            a = activations[i]
            sq += (delta @ delta) * (1.0 + a @ a)
            deltas[i] = delta
            if i > 0:
                delta = self.weights[i].T @ delta
                delta *= self._act_grad(pre_acts[i - 1], activations[i])
        if not np.isfinite(sq):
            raise NumericsError("non-finite gradient; aborting run")
        scale = lr
        if clip_norm is not None and clip_norm > 0.0 and sq > clip_norm ** 2:
            scale = lr * (clip_norm / np.sqrt(sq))
        for i, d in enumerate(deltas):
            d = d * scale
            self.weights[i] += d[:, None] * activations[i][None, :]
            self.biases[i] += d

    def snapshot(self):
        """Flat JSON-friendly record: dims, activations and row-major params."""
        return {
            "layer_dims": list(self.layer_dims),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_snapshot(cls, snap):
        net = cls(snap["layer_dims"],
                  hidden_activation=snap["hidden_activation"],
                  output_activation=snap["output_activation"],
                  zero_init=True)
        for i, (w_flat, b) in enumerate(zip(snap["weights"], snap["biases"])):
            net.weights[i] = np.asarray(w_flat, dtype=np.float64).reshape(
                net.weights[i].shape)
            net.biases[i] = np.asarray(b, dtype=np.float64)
        return net


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / np.sum(e)


def masked_probs(probs, mask):
    """Renormalize a probability vector over the valid entries of `mask`."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != probs.shape:
        raise ValueError("mask shape mismatch")
    if not mask.any():
        raise ValueError("mask allows no action")
    p = np.where(mask, probs, 0.0)
    total = p.sum()
    if total <= 0.0:
        # all valid entries underflowed; fall back to uniform over valid
        p = mask.astype(np.float64)
        total = p.sum()
    return p / total


def select_action(dist, mode, rng=None):
    """Pick an action index from a probability vector.

    sample: inverse-CDF draw from the provided rng (zero-probability
    entries are never selected). greedy: argmax, lowest index on ties.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 1 or dist.size == 0 or np.any(dist < 0.0):
        raise ValueError("invalid distribution")
    if abs(dist.sum() - 1.0) > 1e-6:
        raise ValueError(f"distribution sums to {dist.sum()!r}")
    if mode == "greedy":
        return int(np.argmax(dist))
    if mode != "sample":
        raise ValueError(f"unknown selection mode {mode!r}")
    if rng is None:
        raise ValueError("sample mode needs an rng")
    cdf = np.cumsum(dist)
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    if idx >= dist.size or dist[idx] == 0.0:
        # float shortfall at the top of the CDF: take the last valid entry
        idx = int(np.max(np.nonzero(dist)[0]))
    return idx


@dataclass
class TransitionRecord:
    """One (O_t, a_t, R_t, O_{t+1}) step, plus the action mask in effect."""
    obs: np.ndarray
    action_index: int
    reward: float
    next_obs: np.ndarray
    terminal: bool = False
    mask: np.ndarray | None = None


@dataclass
class A2cAgent:
    """Actor + critic pair with one-step TD learning.

    The TD error doubles as the advantage estimate: the critic takes a
    semi-gradient step on the squared TD error, the actor a policy-gradient
    step along grad log pi(a|O) scaled by the same error.
    """
    actor: FeedForwardNet
    critic: FeedForwardNet
    gamma: float = 0.9
    lr_actor: float = 0.01
    lr_critic: float = 0.05
    clip_norm: float | None = 10.0
    rng_seed: int = 0
    update_count: int = field(default=0, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"gamma {self.gamma} outside [0, 1)")
        if not (0.0 < self.lr_actor <= 1.0):
            raise ValueError(f"lr_actor {self.lr_actor} outside (0, 1]")
        if not (0.0 < self.lr_critic <= 1.0):
            raise ValueError(f"lr_critic {self.lr_critic} outside (0, 1]")
        if self.critic.output_dim != 1:
            raise ValueError("critic must have scalar output")
        if self.actor.output_activation != "softmax":
            raise ValueError("actor needs a softmax output head")

    @classmethod
    def build(cls, obs_dim, n_actions, actor_hidden, critic_hidden, rng_seed,
              gamma=0.9, lr_actor=0.01, lr_critic=0.05, clip_norm=10.0):
        rng = np.random.default_rng(rng_seed)
        actor_dims = [obs_dim, actor_hidden, n_actions] if actor_hidden else [obs_dim, n_actions]
        critic_dims = [obs_dim, critic_hidden, 1] if critic_hidden else [obs_dim, 1]
        actor = FeedForwardNet(actor_dims, rng, output_activation="softmax")
        critic = FeedForwardNet(critic_dims, rng)
        return cls(actor=actor, critic=critic, gamma=gamma, lr_actor=lr_actor,
                   lr_critic=lr_critic, clip_norm=clip_norm, rng_seed=rng_seed)

    @property
    def n_actions(self):
        return self.actor.output_dim

    def action_distribution(self, obs, mask=None):
        """Softmax policy over the action set, renormalized over `mask`."""
        probs, _ = self.actor.forward(obs)
        if mask is not None:
            probs = masked_probs(probs, mask)
        return probs

    def critic_value(self, obs):
        out, _ = self.critic.forward(obs)
        return float(out[0])

    def td_error(self, t: TransitionRecord):
        """R_t + gamma * V(O_{t+1}) - V(O_t); terminal bootstraps V = 0."""
        v_next = 0.0 if t.terminal else self.critic_value(t.next_obs)
        return t.reward + self.gamma * v_next - self.critic_value(t.obs)

    def update_critic(self, t: TransitionRecord):
        """One semi-gradient step on the squared TD error.

        The bootstrap target R + gamma*V(next) is held constant, so the
        step is lr * delta * grad V(O_t). Returns delta computed before
        the parameters move.
        """
        v_next = 0.0 if t.terminal else self.critic_value(t.next_obs)
        out, cache = self.critic.forward(t.obs)
        delta = t.reward + self.gamma * v_next - float(out[0])
        if delta == 0.0:
            return 0.0
        # the gradient delta * grad V already carries the TD-error factor;
        # the step size is just the lr
        self.critic.step_from_logits(cache, np.array([delta]), self.lr_critic,
                                     self.clip_norm)
        self.update_count += 1
        return delta

    def update_actor(self, t: TransitionRecord, delta):
        """Policy-gradient step: theta += lr * delta * grad log pi(a_t|O_t).

        For a (possibly masked) softmax policy the logit gradient of
        log pi(a) is onehot(a) - pi, with masked-out entries at zero.
        """
        if delta == 0.0:
            return
        probs, cache = self.actor.forward(t.obs)
        if t.mask is not None:
            probs = masked_probs(probs, t.mask)
        if not (0 <= t.action_index < self.n_actions):
            raise ValueError(f"action index {t.action_index} out of range")
        grad_logits = probs * (-delta)
        grad_logits[t.action_index] += delta
        self.actor.step_from_logits(cache, grad_logits, self.lr_actor,
                                    self.clip_norm)
        self.update_count += 1

    def learn(self, t: TransitionRecord):
        """Critic step then actor step on one transition; returns delta."""
        delta = self.update_critic(t)
        self.update_actor(t, delta)
        return delta

    def snapshot(self):
        return {
            "actor": self.actor.snapshot(),
            "critic": self.critic.snapshot(),
            "gamma": self.gamma,
            "lr_actor": self.lr_actor,
            "lr_critic": self.lr_critic,
            "clip_norm": self.clip_norm,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_snapshot(cls, snap):
        return cls(actor=FeedForwardNet.from_snapshot(snap["actor"]),
                   critic=FeedForwardNet.from_snapshot(snap["critic"]),
                   gamma=snap["gamma"], lr_actor=snap["lr_actor"],
                   lr_critic=snap["lr_critic"], clip_norm=snap["clip_norm"],
                   rng_seed=snap["rng_seed"])
