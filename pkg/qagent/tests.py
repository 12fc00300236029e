import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from classifiers.services import as_examples, train
from corpus.services import synth_generate
from .network import AgentError, QNetworkParams, backward, forward, init_params, q_forward
from .services import (
    EpsilonSchedule, QAgent, Transition, bellman_target, discounted_return, q_update, reward, select_action,
    state_representation, td_loss_and_grads,
)


def relative_error(analytic, numeric):
    return np.linalg.norm(analytic - numeric) / max(1e-12, np.linalg.norm(analytic) + np.linalg.norm(numeric))


def zero_params(num_subsets, num_classes, head='softmax', b_o=None):
    params = init_params(num_subsets, num_classes, embed_dim=2, hidden_units=4, init_scale=0.0, head=head)
    if b_o is not None:
        params = params.with_arrays({**params.arrays(), 'b_o': np.asarray(b_o, dtype=np.float64)})
    return params


def random_state(rng, num_subsets, num_classes):
    blocks = [rng.dirichlet(np.ones(num_classes)) for _ in range(2 * num_subsets)]
    return np.concatenate(blocks)


class NetworkShapeTests(SimpleTestCase):
    def test_state_and_weight_shapes(self):
        rng = np.random.default_rng(0)
        for K, N, y in ((80, 2, 3), (96, 4, 5), (224, 14, 10)):
            params = init_params(K, N, embed_dim=y)
            self.assertEqual(params.block_dim, 2 * N)
            self.assertEqual(params.state_dim, K * 2 * N)
            self.assertEqual(params.W_f.shape, (2 * N, y))
            self.assertEqual(params.W_h.shape, (K * y, 128))
            self.assertEqual(params.W_o.shape, (128, K))
            q = q_forward(params, random_state(rng, K, N))
            self.assertEqual(q.shape, (K,))
            self.assertAlmostEqual(float(q.sum()), 1.0, places=12)
            self.assertTrue(np.all(q > 0))
        self.assertEqual([init_params(K, N).block_dim for K, N in ((80, 2), (96, 4), (224, 14))], [4, 8, 28])
        self.assertEqual(init_params(80, 2).state_dim, 320)
        self.assertEqual(init_params(96, 4).state_dim, 768)

    def test_rejects_wrong_state_length(self):
        params = init_params(4, 2, hidden_units=8)
        with self.assertRaises(AgentError):
            q_forward(params, np.zeros(15))

    def test_rejects_bad_arrays(self):
        params = init_params(4, 2, hidden_units=8)
        with self.assertRaises(AgentError):
            params.with_arrays({**params.arrays(), 'W_o': np.zeros((8, 3))})
        with self.assertRaises(AgentError):
            init_params(4, 2, head='relu')
        with self.assertRaises(AgentError):
            init_params(0, 2)

    def test_seeded_initialisation(self):
        a, b = init_params(6, 3, seed=9), init_params(6, 3, seed=9)
        for name, array in a.arrays().items():
            np.testing.assert_array_equal(array, b.arrays()[name])
        self.assertTrue(np.all(np.abs(a.W_h) <= 0.05))


class ForwardTests(SimpleTestCase):
    def test_softmax_head_sums_to_one(self):
        rng = np.random.default_rng(1)
        params = init_params(8, 3, hidden_units=16, init_scale=0.5, seed=2)
        for _ in range(20):
            q = q_forward(params, random_state(rng, 8, 3))
            self.assertAlmostEqual(float(q.sum()), 1.0, places=12)
            self.assertTrue(np.all(q > 0))

    def test_zero_weights_give_uniform_q(self):
        q = q_forward(zero_params(5, 2), np.random.default_rng(0).random(20))
        np.testing.assert_allclose(q, np.full(5, 0.2))

    def test_block_permutation_is_equivariant(self):
        """Test that permuting state blocks with the matching weight blocks permutes the Q-values"""
        rng = np.random.default_rng(3)
        K, N, y = 5, 2, 3
        params = init_params(K, N, embed_dim=y, hidden_units=12, init_scale=0.5, seed=4)
        state = random_state(rng, K, N)
        perm = rng.permutation(K)
        permuted_state = state.reshape(K, 2 * N)[perm].reshape(-1)
        rows = params.W_h.reshape(K, y, -1)[perm].reshape(K * y, -1)
        permuted = params.with_arrays({
            **params.arrays(), 'W_h': rows, 'W_o': params.W_o[:, perm], 'b_o': params.b_o[perm],
        })
        np.testing.assert_allclose(q_forward(permuted, permuted_state), q_forward(params, state)[perm])


class GradientTests(SimpleTestCase):
    def check_gradients(self, head):
        rng = np.random.default_rng(7)
        eps = 1e-6
        for instance in range(20):
            params = init_params(4, 2, embed_dim=3, hidden_units=16, init_scale=0.5, seed=instance, head=head)
            state = random_state(rng, 4, 2)
            weights = rng.normal(size=4)
            _, cache = forward(params, state)
            analytic = backward(params, cache, weights)
            for name, array in params.arrays().items():
                numeric = np.zeros_like(array)
                for index in np.ndindex(array.shape):
                    plus, minus = array.copy(), array.copy()
                    plus[index] += eps
                    minus[index] -= eps
                    up = q_forward(params.with_arrays({**params.arrays(), name: plus}), state) @ weights
                    down = q_forward(params.with_arrays({**params.arrays(), name: minus}), state) @ weights
                    numeric[index] = (up - down) / (2 * eps)
                self.assertLess(relative_error(analytic[name], numeric), 1e-4, msg=f"{head} {name}")

    def test_softmax_head(self):
        self.check_gradients('softmax')

    def test_linear_head(self):
        self.check_gradients('linear')


class StateRepresentationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = synth_generate(3, 10, 20, 0.1, seed=2)
        examples = as_examples(cls.dataset)
        cls.c1 = train(examples, 'view1', num_classes=3)
        cls.c2 = train(examples, 'view2', num_classes=3)

    def test_layout(self):
        reps = list(self.dataset)[:4]
        state = state_representation(self.c1, self.c2, reps)
        self.assertEqual(state.shape, (4 * 6,))
        blocks = state.reshape(4, 6)
        np.testing.assert_allclose(blocks[:, :3], self.c1.predict_proba_many(reps))
        np.testing.assert_allclose(blocks[:, 3:], self.c2.predict_proba_many(reps))

    def test_same_classifier_gives_equal_halves(self):
        blocks = state_representation(self.c1, self.c1, list(self.dataset)[:5]).reshape(5, 6)
        np.testing.assert_array_equal(blocks[:, :3], blocks[:, 3:])

    def test_needs_representatives(self):
        with self.assertRaises(AgentError):
            state_representation(self.c1, self.c2, [])


class ActionAndRewardTests(SimpleTestCase):
    def test_greedy_takes_first_argmax(self):
        rng = np.random.default_rng(0)
        self.assertEqual(select_action([0.1, 0.4, 0.4, 0.1], 0.0, rng), 1)

    def test_greedy_does_not_consume_randomness(self):
        rng = np.random.default_rng(12)
        select_action([0.3, 0.7], 0.0, rng)
        self.assertEqual(rng.random(), np.random.default_rng(12).random())

    def test_exploration_frequency(self):
        rng = np.random.default_rng(5)
        picks = [select_action([0.1, 0.2, 0.6, 0.1], 0.3, rng) for _ in range(10000)]
        share = picks.count(2) / len(picks)
        self.assertAlmostEqual(share, 0.7 + 0.3 / 4, delta=0.02)
        self.assertEqual(set(picks), {0, 1, 2, 3})

    def test_epsilon_range(self):
        with self.assertRaises(AgentError):
            select_action([1.0], 1.5, np.random.default_rng(0))

    def test_reward_examples(self):
        self.assertAlmostEqual(reward(0.5, 0.6, 0.5, 0.7), 0.02)
        self.assertEqual(reward(0.5, 0.6, 0.5, 0.5), 0.0)
        self.assertEqual(reward(0.5, 0.4, 0.5, 0.3), 0.0)
        self.assertEqual(reward(0.5, 0.6, 0.7, 0.6), 0.0)

    def test_discounted_return(self):
        self.assertAlmostEqual(discounted_return([1.0, 1.0, 1.0], 0.5), 1.75)
        self.assertEqual(discounted_return([], 0.9), 0.0)


class BellmanTests(SimpleTestCase):
    def test_target_uses_max_of_target_network(self):
        params = zero_params(2, 1, head='linear', b_o=[0.1, 0.2])
        s_next = np.zeros(params.state_dim)
        self.assertAlmostEqual(bellman_target(0.0, s_next, params, 0.9, terminal=False), 0.18)
        self.assertEqual(bellman_target(0.25, s_next, params, 0.9, terminal=True), 0.25)

    def test_no_gradient_when_target_matches(self):
        rng = np.random.default_rng(2)
        params = init_params(4, 2, hidden_units=16, init_scale=0.3, seed=1)
        state = random_state(rng, 4, 2)
        q = q_forward(params, state)
        transition = Transition(state, 1, float(q[1]), state, terminal=True)
        loss, grads = td_loss_and_grads(params, transition, float(q[1]))
        self.assertEqual(loss, 0.0)
        for grad in grads.values():
            np.testing.assert_allclose(grad, 0.0, atol=1e-15)
        updated = q_update(params, transition, params, 0.9, 0.1)
        np.testing.assert_allclose(updated.W_h, params.W_h)

    def test_small_steps_reduce_loss(self):
        rng = np.random.default_rng(8)
        decreased = 0
        for trial in range(100):
            params = init_params(4, 2, hidden_units=16, init_scale=0.5, seed=trial)
            state = random_state(rng, 4, 2)
            transition = Transition(state, int(rng.integers(4)), float(rng.random()), state, terminal=True)
            before, _ = td_loss_and_grads(params, transition, transition.r)
            after, _ = td_loss_and_grads(q_update(params, transition, params, 0.9, 1e-3), transition, transition.r)
            decreased += after < before
            tiny, _ = td_loss_and_grads(q_update(params, transition, params, 0.9, 1e-4), transition, transition.r)
            self.assertLessEqual(tiny, before + 1e-12)
        self.assertGreaterEqual(decreased, 99)

    def test_update_leaves_inputs_alone(self):
        params = init_params(3, 2, hidden_units=8, init_scale=0.3)
        snapshot = params.copy()
        state = random_state(np.random.default_rng(0), 3, 2)
        q_update(params, Transition(state, 0, 0.5, state), params, 0.9, 0.1)
        np.testing.assert_array_equal(params.W_o, snapshot.W_o)

    def test_invalid_learning_rate(self):
        params = zero_params(2, 1)
        state = np.zeros(params.state_dim)
        with self.assertRaises(AgentError):
            q_update(params, Transition(state, 0, 0.0, state), params, 0.9, 0.0)


class TransitionTests(SimpleTestCase):
    def test_validation(self):
        s = np.zeros(4)
        with self.assertRaises(AgentError):
            Transition(s, 0, -0.1, s)
        with self.assertRaises(AgentError):
            Transition(s, -1, 0.0, s)
        with self.assertRaises(AgentError):
            Transition(s, 0, 0.0, np.zeros(5))
        with self.assertRaises(AgentError):
            Transition(s, 3, 0.0, s).check_actions(2)


class EpsilonScheduleTests(SimpleTestCase):
    def test_linear_decay_then_flat(self):
        schedule = EpsilonSchedule(100, start=1.0, end=0.1, decay_fraction=0.6)
        self.assertEqual(schedule.value(0), 1.0)
        self.assertAlmostEqual(schedule.value(30), 0.55)
        self.assertEqual(schedule.value(60), 0.1)
        self.assertEqual(schedule.value(99), 0.1)

    def test_zero_decay_fraction(self):
        self.assertEqual(EpsilonSchedule(10, decay_fraction=0.0).value(0), 0.1)

    def test_validation(self):
        with self.assertRaises(AgentError):
            EpsilonSchedule(0)
        with self.assertRaises(AgentError):
            EpsilonSchedule(10, start=1.5)


# Four-state chain: actions 0=left, 1=right. Left from state 0 ends the episode with 0.75,
# right from state 2 ends it with 1.0; every other move pays 0.
CHAIN_STATES = 4
CHAIN_START = 0


def chain_step(state, action):
    if state == 0 and action == 0:
        return state, 0.75, True
    if state == 2 and action == 1:
        return 3, 1.0, True
    return max(0, state - 1) if action == 0 else state + 1, 0.0, False


def chain_vector(state):
    return np.eye(CHAIN_STATES)[state]


def chain_optimal_policy(gamma):
    values = np.zeros(CHAIN_STATES)
    for _ in range(200):
        for state in range(3):
            values[state] = max(
                r + (0.0 if done else gamma * values[nxt])
                for nxt, r, done in (chain_step(state, a) for a in (0, 1))
            )
    policy = []
    for state in range(3):
        scores = [r + (0.0 if done else gamma * values[nxt])
                  for nxt, r, done in (chain_step(state, a) for a in (0, 1))]
        policy.append(int(np.argmax(scores)))
    return policy


class QAgentTests(SimpleTestCase):
    def test_target_refresh_interval(self):
        agent = QAgent.create(3, 2, hidden_units=8, init_scale=0.3, target_refresh_interval=3, seed=1)
        initial = agent.target_params.copy()
        state = random_state(np.random.default_rng(1), 3, 2)
        for _ in range(2):
            agent.learn(Transition(state, 0, 0.5, state))
        np.testing.assert_array_equal(agent.target_params.W_o, initial.W_o)
        agent.learn(Transition(state, 0, 0.5, state))
        np.testing.assert_array_equal(agent.target_params.W_o, agent.params.W_o)

    def test_learns_chain_policy(self):
        """Test that exploratory Q-learning recovers the value-iteration policy on a small chain"""
        gamma = 0.8
        optimal = chain_optimal_policy(gamma)
        self.assertEqual(optimal, [0, 1, 1])
        matches = 0
        for seed in range(5):
            # K=2 blocks of 2N=2 entries carry the one-hot chain state
            agent = QAgent.create(2, 1, embed_dim=2, hidden_units=32, head='linear', init_scale=0.3,
                                  gamma=gamma, learning_rate=0.05, target_refresh_interval=1, seed=seed)
            state = CHAIN_START
            for _ in range(5000):
                action = agent.act(chain_vector(state), 1.0)
                nxt, r, done = chain_step(state, action)
                agent.learn(Transition(chain_vector(state), action, r, chain_vector(nxt), terminal=done))
                state = CHAIN_START if done else nxt
            learned = [agent.act(chain_vector(s), 0.0) for s in range(3)]
            matches += learned == optimal
        self.assertEqual(matches, 5)


class PersistenceTests(SimpleTestCase):
    def test_save_and_load(self):
        params = init_params(4, 3, hidden_units=8, seed=2, head='linear')
        with tempfile.TemporaryDirectory() as tmp:
            loaded = QNetworkParams.load(params.save(Path(tmp) / 'qnet.json'))
        self.assertEqual(loaded.head, 'linear')
        self.assertEqual(loaded.num_subsets, 4)
        state = random_state(np.random.default_rng(0), 4, 3)
        np.testing.assert_allclose(q_forward(loaded, state), q_forward(params, state))

    def test_malformed_record(self):
        with self.assertRaises(AgentError):
            QNetworkParams.from_dict({'arrays': {}})
