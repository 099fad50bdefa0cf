"""Desk-scale deep Q-learning: replay buffer, double-Q targets, manual
backprop with an adaptive-moment optimizer, and the iterative
prune/rewind/retrain pipeline.

The public network forward pass is single-state; training uses its own
batched forward/backward over the same im2col machinery. Masked weights
receive no gradient and are re-zeroed after every optimizer step, so they
stay exactly zero throughout training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import TrainingConfig
from .delta import DeltaNetwork, OpCounter
from .envs import Environment, random_policy_reward
from .network import (NetworkSpec, WeightSet, forward, im2col_indices,
                      init_weights, static_network_multiplications)
from .pruning import PrunableWeights, prune_step, report_sparsity, rewind


class TrainingDiverged(RuntimeError):
    """Raised when the Q-loss stops being finite."""


# ---------------------------------------------------------------------------
# replay buffer
# ---------------------------------------------------------------------------

@dataclass
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class Batch:
    states: np.ndarray       # (B, ...) float64
    actions: np.ndarray      # (B,) int64
    rewards: np.ndarray      # (B,) float64
    next_states: np.ndarray  # (B, ...) float64
    dones: np.ndarray        # (B,) bool


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling.

    States are held as float32 (exact for the binary grid observations) and
    returned as float64 batches.
    """

    def __init__(self, capacity: int, state_shape: tuple[int, ...]):
        self.capacity = int(capacity)
        self.size = 0
        self.pos = 0
        self.s = np.zeros((capacity, *state_shape), dtype=np.float32)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity, dtype=np.float64)
        self.s_next = np.zeros((capacity, *state_shape), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=bool)

    def add(self, s: np.ndarray, a: int, r: float, s_next: np.ndarray,
            done: bool) -> None:
        if not np.isfinite(r):
            raise ValueError("non-finite reward")
        i = self.pos
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self.done[i] = done
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        if self.size < n:
            raise ValueError(f"buffer holds {self.size} < batch size {n}")
        idx = rng.integers(0, self.size, size=n)
        return Batch(
            states=self.s[idx].astype(np.float64),
            actions=self.a[idx].copy(),
            rewards=self.r[idx].copy(),
            next_states=self.s_next[idx].astype(np.float64),
            dones=self.done[idx].copy(),
        )


# ---------------------------------------------------------------------------
# batched forward / backward
# ---------------------------------------------------------------------------

def _im2col_batch(x: np.ndarray, ky: int, kx: int, stride: int) -> np.ndarray:
    """(B, C, H, W) -> (B, C*ky*kx, out_h*out_w) columns, row index ordered
    as (channel, kernel_y, kernel_x)."""
    b, c = x.shape[:2]
    win = np.lib.stride_tricks.sliding_window_view(x, (ky, kx), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]          # (B, C, OH, OW, ky, kx)
    oh, ow = win.shape[2], win.shape[3]
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * ky * kx, oh * ow)
    return np.ascontiguousarray(cols)


def forward_batch(spec: NetworkSpec, w: WeightSet, x: np.ndarray,
                  want_caches: bool = False):
    """Batched forward pass over (B, C, H, W) states; optionally keeps the
    intermediates needed for the backward pass."""
    b = x.shape[0]
    cur = x
    caches = []
    for i, layer in enumerate(spec.layers):
        if layer.kind == "conv2d":
            f = layer.out_filters
            cols = _im2col_batch(cur, layer.kernel_y, layer.kernel_x,
                                 layer.stride)                 # (B, CKK, P)
            pre = np.matmul(w.weights[i].reshape(f, -1), cols) # (B, F, P)
            pre += w.biases[i].reshape(1, f, 1)
            out_h, out_w = layer.conv_output_hw(cur.shape[2], cur.shape[3])
            pre = pre.reshape(b, f, out_h, out_w)
            cache = (cur, cols, pre)
        else:
            flat = cur.reshape(b, -1)
            pre = flat @ w.weights[i].T + w.biases[i]
            cache = (cur, flat, pre)
        if want_caches:
            caches.append(cache)
        cur = np.maximum(pre, 0.0) if layer.activation == "relu" else pre
    q = cur.reshape(b, -1)
    return (q, caches) if want_caches else q


def backward_batch(spec: NetworkSpec, w: WeightSet, caches, d_out: np.ndarray):
    """Gradients of a scalar loss wrt all weights/biases, given d(loss)/d(q).

    Returns (weight_grads, bias_grads) lists aligned with the layers.
    """
    gw = [None] * len(spec.layers)
    gb = [None] * len(spec.layers)
    g = d_out
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        x_in, mat, pre = caches[i]
        g = g.reshape(pre.shape)
        if layer.activation == "relu":
            g = g * (pre > 0)
        if layer.kind == "dense":
            gw[i] = g.T @ mat
            gb[i] = g.sum(axis=0)
            if i > 0:
                g = (g @ w.weights[i]).reshape(x_in.shape)
        else:
            f = layer.out_filters
            gm = g.reshape(g.shape[0], f, -1)                  # (B, F, P)
            gw[i] = np.einsum("bfp,bkp->fk", gm, mat).reshape(w.weights[i].shape)
            gb[i] = gm.sum(axis=(0, 2))
            if i > 0:
                dcols = np.einsum("fk,bfp->bkp", w.weights[i].reshape(f, -1), gm)
                dx = np.zeros_like(x_in)
                chans, rows, cols_idx = im2col_indices(
                    x_in.shape[1:], layer.kernel_y, layer.kernel_x, layer.stride)
                bidx = np.arange(x_in.shape[0])[:, None, None]
                np.add.at(dx, (bidx, chans, rows, cols_idx), dcols)
                g = dx
    return gw, gb


def huber(e: np.ndarray, delta: float = 1.0) -> np.ndarray:
    a = np.abs(e)
    return np.where(a <= delta, 0.5 * e * e, delta * (a - 0.5 * delta))


def huber_grad(e: np.ndarray, delta: float = 1.0) -> np.ndarray:
    return np.clip(e, -delta, delta)


def q_loss_and_grads(spec: NetworkSpec, w: WeightSet, states: np.ndarray,
                     actions: np.ndarray, targets: np.ndarray,
                     delta: float = 1.0):
    """Mean Huber loss between Q(s, a) and fixed targets, plus its analytic
    gradients wrt every weight and bias."""
    b = states.shape[0]
    q, caches = forward_batch(spec, w, states, want_caches=True)
    q_a = q[np.arange(b), actions]
    err = q_a - targets
    loss = float(np.mean(huber(err, delta)))
    d_q = np.zeros_like(q)
    d_q[np.arange(b), actions] = huber_grad(err, delta) / b
    gw, gb = backward_batch(spec, w, caches, d_q)
    return loss, gw, gb


class Adam:
    """Adaptive-moment optimizer updating arrays in place."""

    def __init__(self, params: list[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# double Q-learning
# ---------------------------------------------------------------------------

@dataclass
class AgentParams:
    """Everything the learner carries besides the replay buffer."""

    online: WeightSet
    target: WeightSet
    gamma: float
    learning_rate: float
    epsilon_start: float
    epsilon_end: float
    epsilon_decay_steps: int
    target_sync: int

    def epsilon(self, step: int) -> float:
        if self.epsilon_decay_steps <= 0:
            return self.epsilon_end
        frac = min(1.0, step / self.epsilon_decay_steps)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def double_q_target(batch: Batch, spec: NetworkSpec,
                    params: AgentParams) -> np.ndarray:
    """y = r + gamma * Q_target(s', argmax_a Q_online(s', a)); terminal
    transitions use y = r. Action selection and valuation are decoupled."""
    q_online = forward_batch(spec, params.online, batch.next_states)
    best = np.argmax(q_online, axis=1)
    q_target = forward_batch(spec, params.target, batch.next_states)
    bootstrap = q_target[np.arange(len(best)), best]
    return batch.rewards + params.gamma * np.where(batch.dones, 0.0, bootstrap)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    curve: list[tuple[int, float]] = field(default_factory=list)
    final_loss: float = float("nan")
    gradient_steps: int = 0


def greedy_action(spec: NetworkSpec, w: WeightSet, state: np.ndarray) -> int:
    return int(np.argmax(forward(spec, w, state)))


def train(env: Environment, spec: NetworkSpec, p: PrunableWeights,
          cfg: TrainingConfig, rng: np.random.Generator,
          eval_env: Environment | None = None) -> TrainResult:
    """Gradient-train the live weights of `p` in place on `env`.

    Masked weights get zero gradient and are re-zeroed after each update.
    Raises TrainingDiverged if the loss goes non-finite.
    """
    if spec.input_shape != env.state_shape:
        raise ValueError(
            f"network input {spec.input_shape} != env state {env.state_shape}")
    p.apply()
    params = AgentParams(
        online=p.live, target=p.live.copy(), gamma=cfg.gamma,
        learning_rate=cfg.learning_rate, epsilon_start=cfg.epsilon_start,
        epsilon_end=cfg.epsilon_end,
        epsilon_decay_steps=cfg.epsilon_decay_steps,
        target_sync=cfg.target_sync)
    arrays = list(p.live.weights) + list(p.live.biases)
    opt = Adam(arrays, lr=cfg.learning_rate, beta1=cfg.adam_beta1,
               beta2=cfg.adam_beta2, eps=cfg.adam_eps)
    buffer = ReplayBuffer(cfg.buffer_capacity, env.state_shape)
    result = TrainResult()

    state = env.reset()
    for step in range(cfg.steps):
        eps = params.epsilon(step)
        if rng.random() < eps:
            action = int(rng.integers(env.n_actions))
        else:
            try:
                action = greedy_action(spec, params.online, state)
            except ValueError as e:  # non-finite activations: weights blew up
                raise TrainingDiverged(
                    f"non-finite network output at step {step} "
                    f"(lr={cfg.learning_rate}): {e}") from e
        s_next, r, done = env.step(action)
        buffer.add(state, action, r, s_next, done)
        state = env.reset() if done else s_next

        if buffer.size >= max(cfg.min_buffer, cfg.batch_size) and \
                step % cfg.update_every == 0:
            batch = buffer.sample(cfg.batch_size, rng)
            y = double_q_target(batch, spec, params)
            loss, gw, gb = q_loss_and_grads(
                spec, params.online, batch.states, batch.actions, y,
                delta=cfg.huber_delta)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at step {step} "
                    f"(lr={cfg.learning_rate}, batch={cfg.batch_size})")
            for k, m in enumerate(p.masks):
                gw[k] = np.where(m, gw[k], 0.0)
            opt.step(gw + gb)
            p.apply()
            result.final_loss = loss
            result.gradient_steps += 1

        if (step + 1) % cfg.target_sync == 0:
            for dst, src in zip(params.target.weights, params.online.weights):
                np.copyto(dst, src)
            for dst, src in zip(params.target.biases, params.online.biases):
                np.copyto(dst, src)

        if eval_env is not None and cfg.eval_every > 0 and \
                (step + 1) % cfg.eval_every == 0:
            score = evaluate(eval_env, spec, params.online,
                             cfg.curve_episodes).mean_reward
            result.curve.append((step + 1, score))

    p.apply()
    return result


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalResult:
    mean_reward: float
    rewards: list[float]
    counter: OpCounter


def _dense_counter_template(spec: NetworkSpec) -> tuple[list[int], list[int], list[int]]:
    """Per-weighted-layer static multiplications plus input/output sizes,
    aligned with the OpCounter rows after Input."""
    report = static_network_multiplications(spec)
    mults = [r.multiplications for r in report.rows if r.name != "Flatten"]
    shapes = spec.output_shapes()
    in_sizes, out_sizes = [], []
    cur = int(np.prod(spec.input_shape))
    for s in shapes:
        in_sizes.append(cur)
        cur = int(np.prod(s))
        out_sizes.append(cur)
    return mults, in_sizes, out_sizes


def evaluate(env: Environment, spec: NetworkSpec, weights: WeightSet,
             episodes: int, mode: str = "dense",
             thresholds: float | list[float] = 0.001,
             input_threshold: float | None = None,
             masks: list[np.ndarray] | None = None) -> EvalResult:
    """Greedy rollouts; returns mean reward and merged operation counters.

    Dense mode performs (and counts) every static multiplication each step.
    Delta mode drives actions from the event engine's transmitted outputs
    and counts only significant multiplications.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rewards: list[float] = []
    if mode == "dense":
        counter = OpCounter(spec.layer_names())
        mults, in_sizes, out_sizes = _dense_counter_template(spec)
        input_size = int(np.prod(spec.input_shape))
        w_eff = weights
        if masks is not None:
            w_eff = weights.copy()
            for k, m in enumerate(masks):
                w_eff.weights[k][~m] = 0.0
        for _ in range(episodes):
            state = env.reset()
            done, total = False, 0.0
            while not done:
                action = greedy_action(spec, w_eff, state)
                state, r, done = env.step(action)
                total += r
                counter.timesteps += 1
                counter.events_sent[0] += input_size
                for k in range(len(spec.layers)):
                    counter.significant_multiplications[k + 1] += mults[k]
                    counter.events_received[k + 1] += in_sizes[k]
                    counter.events_sent[k + 1] += out_sizes[k]
            rewards.append(total)
    elif mode == "delta":
        dn = DeltaNetwork(spec, weights, thresholds, input_threshold, masks)
        for _ in range(episodes):
            dn.reset_state()
            state = env.reset()
            done, total = False, 0.0
            while not done:
                q = dn.step(state)
                state, r, done = env.step(int(np.argmax(q)))
                total += r
            rewards.append(total)
        counter = dn.counter
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EvalResult(float(np.mean(rewards)), rewards, counter)


# ---------------------------------------------------------------------------
# lottery pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineRecord:
    """One pruning iteration: its sparsity, rewards, and delta counters."""

    iteration: int
    sparsity_scope: float
    sparsity_all: float
    per_layer_sparsity: tuple[float, ...]
    reward_dense: float
    delta_results: dict[float, EvalResult]
    weights: WeightSet
    masks: list[np.ndarray]
    curve: list[tuple[int, float]]


@dataclass
class PipelineResult:
    records: list[PipelineRecord]
    baseline_reward_dense: float
    baseline_random: float
    baseline_curve: list[tuple[int, float]]
    baseline_weights: WeightSet
    spec: NetworkSpec
    prunable: PrunableWeights


def lottery_pipeline(env: Environment, spec: NetworkSpec, rate: float,
                     n_iterations: int, cfg: TrainingConfig, *, seed: int,
                     scope: tuple[int, ...] | None = None,
                     thresholds: tuple[float, ...] = (0.0, 0.001),
                     input_threshold: float | None = None,
                     eval_episodes: int = 30) -> PipelineResult:
    """Train, then repeat prune -> rewind -> retrain `n_iterations` times,
    evaluating each retrained network in dense and delta modes.

    Evaluation always uses freshly seeded environment forks with the same
    seed, so rewards are comparable across iterations and modes.
    """
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    seq = np.random.SeedSequence(seed)
    init_seed, eval_seed, rand_seed, *train_seeds = seq.generate_state(
        3 + (n_iterations + 1)).tolist()

    rng_init = np.random.default_rng(init_seed)
    p = PrunableWeights.create(spec, init_weights(spec, rng_init), rate, scope)

    def fresh_eval_env() -> Environment:
        return env.fork(eval_seed)

    # iteration 0: dense training and baselines
    rng0 = np.random.default_rng(train_seeds[0])
    res0 = train(env.fork(train_seeds[0]), spec, p, cfg, rng0,
                 eval_env=env.fork(eval_seed + 1))
    baseline_dense = evaluate(fresh_eval_env(), spec, p.live, eval_episodes)
    baseline_random = random_policy_reward(env.fork(rand_seed), eval_episodes,
                                           seed=rand_seed)
    baseline_weights = p.live.copy()

    records: list[PipelineRecord] = []
    for i in range(1, n_iterations + 1):
        prune_step(p, scope)
        rewind(p)
        rng_i = np.random.default_rng(train_seeds[i])
        res_i = train(env.fork(train_seeds[i]), spec, p, cfg, rng_i,
                      eval_env=env.fork(eval_seed + 1))
        sp = report_sparsity(p)
        dense_eval = evaluate(fresh_eval_env(), spec, p.live, eval_episodes,
                              masks=p.masks)
        delta_results = {}
        for t in thresholds:
            delta_results[t] = evaluate(
                fresh_eval_env(), spec, p.live, eval_episodes, mode="delta",
                thresholds=t, input_threshold=input_threshold, masks=p.masks)
        records.append(PipelineRecord(
            iteration=i, sparsity_scope=sp.scope_total, sparsity_all=sp.total,
            per_layer_sparsity=sp.per_layer,
            reward_dense=dense_eval.mean_reward, delta_results=delta_results,
            weights=p.live.copy(), masks=[m.copy() for m in p.masks],
            curve=res_i.curve))
    return PipelineResult(records, baseline_dense.mean_reward,
                          baseline_random, res0.curve, baseline_weights,
                          spec, p)
