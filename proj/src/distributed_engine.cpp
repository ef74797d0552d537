#include "asyvrsc/distributed_engine.hpp"

#include <fstream>
#include <sstream>
#include <thread>

namespace asyvrsc {

namespace {

std::uint32_t wire_count(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw std::overflow_error(std::string(what) + " does not fit the wire format");
  return static_cast<std::uint32_t>(v);
}

void require_size(const Vector& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw ProtocolError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                        std::to_string(n));
  }
}

void require_shape(const RowMatrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
    throw ProtocolError(std::string(what) + " has shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                        std::to_string(cols));
  }
}

Message make(std::size_t epoch, std::size_t iteration, Message::Body body) {
  Message m;
  m.epoch = wire_count(epoch, "epoch");
  m.iteration = wire_count(iteration, "iteration");
  m.body = std::move(body);
  return m;
}

// Next phase-1 message from worker k, skipping gradients of finished epochs.
Message expect_from(Transport& transport, std::size_t k, MessageTag tag, std::size_t epoch,
                    std::size_t* stragglers) {
  for (;;) {
    Message m = transport.receive_from(k);
    if (m.tag() == MessageTag::kGradient && m.epoch < epoch) {
      if (stragglers) ++*stragglers;
      continue;
    }
    if (m.tag() != tag || m.epoch != epoch) {
      throw ProtocolError("worker " + std::to_string(k) + ": expected " + tag_name(tag) + " for epoch " +
                          std::to_string(epoch) + ", got " + tag_name(m.tag()) + " for epoch " +
                          std::to_string(m.epoch));
    }
    return m;
  }
}

void check_sender(std::size_t claimed, std::size_t actual) {
  if (claimed != actual) {
    throw ProtocolError("message from worker " + std::to_string(actual) + " claims to be from worker " +
                        std::to_string(claimed));
  }
}

}  // namespace

Partition Partition::even(const Dimensions& dims, std::size_t workers) {
  if (workers == 0) throw std::invalid_argument("partition needs at least one worker");
  return Partition{split_evenly(dims.n2, workers), split_evenly(dims.n1, workers)};
}

void Partition::validate(const Dimensions& dims) const {
  if (inner_blocks.empty() || inner_blocks.size() != outer_blocks.size()) {
    throw std::invalid_argument("partition needs one inner and one outer block per worker");
  }
  const auto check = [](const std::vector<IndexRange>& blocks, std::size_t n, const char* what) {
    std::size_t next = 0;
    for (const auto& b : blocks) {
      if (b.begin != next || b.end < b.begin) throw std::invalid_argument(std::string(what) + " blocks are not contiguous");
      next = b.end;
    }
    if (next != n) throw std::invalid_argument(std::string(what) + " blocks do not cover all samples");
  };
  check(inner_blocks, dims.n2, "inner");
  check(outer_blocks, dims.n1, "outer");
}

InterleavingScript InterleavingScript::round_robin() { return {}; }

InterleavingScript InterleavingScript::oldest_within(std::size_t bound) {
  InterleavingScript s;
  s.kind_ = Kind::kOldestWithin;
  s.bound_ = bound;
  return s;
}

InterleavingScript InterleavingScript::from_entries(std::map<std::pair<std::size_t, std::size_t>, std::size_t> entries) {
  InterleavingScript s;
  s.kind_ = Kind::kTable;
  s.table_ = std::move(entries);
  return s;
}

InterleavingScript InterleavingScript::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script file " + path.string());
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    long long s = -1, t = -1, w = -1;
    std::string rest;
    if (!(ss >> s >> t >> w) || (ss >> rest) || s < 0 || t < 0 || w < 0) {
      if (line_no == 1 && line.find('s') != std::string::npos) continue;  // header
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 's,t,worker'");
    }
    entries[{static_cast<std::size_t>(s), static_cast<std::size_t>(t)}] = static_cast<std::size_t>(w);
  }
  return from_entries(std::move(entries));
}

std::size_t InterleavingScript::pick(std::size_t epoch, std::size_t t, const std::vector<std::size_t>& reads) const {
  const std::size_t W = reads.size();
  switch (kind_) {
    case Kind::kRoundRobin:
      return t % W;
    case Kind::kOldestWithin: {
      std::size_t best = W;
      for (std::size_t w = 0; w < W; ++w) {
        if (t - reads[w] > bound_) continue;
        if (best == W || reads[w] < reads[best]) best = w;
      }
      // The worker served last always holds the current iterate.
      if (best == W) throw std::logic_error("no worker within the staleness bound");
      return best;
    }
    case Kind::kTable: {
      const auto it = table_.find({epoch, t});
      const std::size_t w = it == table_.end() ? t % W : it->second;
      if (w >= W) {
        throw std::invalid_argument("script names worker " + std::to_string(w) + " but only " + std::to_string(W) +
                                    " exist");
      }
      return w;
    }
  }
  return 0;
}

std::optional<std::size_t> InterleavingScript::bound() const {
  if (kind_ == Kind::kOldestWithin) return bound_;
  return std::nullopt;
}

void DistributedOptions::validate() const {
  solver.validate();
  if (workers == 0) throw std::invalid_argument("workers must be at least 1");
  if (solver.epochs > 0xffffffffu || solver.inner_iterations > 0xffffffffu) {
    throw std::invalid_argument("epoch and iteration counts must fit in 32 bits");
  }
}

Snapshot master_phase1(const CompositionProblem& problem, const Vector& x_tilde, const Partition& partition,
                       Transport& transport, std::size_t epoch, std::size_t* stragglers) {
  const auto dims = problem.dimensions();
  require_parameter_length(problem, x_tilde);
  partition.validate(dims);
  const std::size_t W = partition.workers();
  if (transport.workers() != W) throw std::invalid_argument("partition and transport disagree on worker count");

  transport.broadcast(make(epoch, 0, msg::BroadcastXTilde{x_tilde}));
  std::vector<Vector> inner_sums(W);
  std::vector<RowMatrix> jacobian_sums(W);
  for (std::size_t k = 0; k < W; ++k) {
    auto inner = expect_from(transport, k, MessageTag::kPartialInner, epoch, stragglers).as<msg::PartialInner>();
    check_sender(inner.worker, k);
    require_size(inner.sum, dims.d2, "PartialInner");
    inner_sums[k] = std::move(inner.sum);
    auto jac = expect_from(transport, k, MessageTag::kPartialJacobian, epoch, stragglers).as<msg::PartialJacobian>();
    check_sender(jac.worker, k);
    require_shape(jac.sum, dims.d2, dims.d1, "PartialJacobian");
    jacobian_sums[k] = std::move(jac.sum);
  }
  Vector inner = combine_inner(problem, inner_sums);
  transport.broadcast(make(epoch, 0, msg::BroadcastInner{inner}));

  std::vector<Vector> outer_sums(W);
  for (std::size_t k = 0; k < W; ++k) {
    auto outer = expect_from(transport, k, MessageTag::kPartialOuterGrad, epoch, stragglers).as<msg::PartialOuterGrad>();
    check_sender(outer.worker, k);
    require_size(outer.sum, dims.d2, "PartialOuterGrad");
    outer_sums[k] = std::move(outer.sum);
  }
  Snapshot snapshot = finish_snapshot(problem, x_tilde, std::move(inner), jacobian_sums, outer_sums, epoch);
  transport.broadcast(
      make(epoch, 0, msg::BroadcastSnapshot{snapshot.inner_jacobian.to_dense(), snapshot.full_grad, x_tilde}));
  return snapshot;
}

void worker_loop(const CompositionProblem& problem, const WorkerConfig& config, Transport& transport) {
  const auto dims = problem.dimensions();
  const std::size_t k = config.worker;
  config.partition.validate(dims);
  if (k >= config.partition.workers()) throw std::invalid_argument("worker id outside the partition");
  const IndexRange inner_block = config.partition.inner_blocks[k];
  const IndexRange outer_block = config.partition.outer_blocks[k];
  Rng rng(config.seed ^ static_cast<std::uint64_t>(k));

  std::optional<std::size_t> epoch;
  bool in_phase2 = false;
  Snapshot snapshot;
  Vector grad;
  const auto fail = [&](const std::string& what) { throw ProtocolError("worker " + std::to_string(k) + ": " + what); };

  for (;;) {
    Message m = transport.worker_receive(k);
    switch (m.tag()) {
      case MessageTag::kShutdown:
        return;
      case MessageTag::kBroadcastXTilde: {
        if (epoch && m.epoch <= *epoch) fail("epoch went from " + std::to_string(*epoch) + " to " + std::to_string(m.epoch));
        epoch = m.epoch;
        in_phase2 = false;
        const Vector x_tilde = m.as<msg::BroadcastXTilde>().x_tilde;
        require_size(x_tilde, dims.d1, "BroadcastXTilde");
        transport.send_to_master(k, make(*epoch, 0, msg::PartialInner{k, sum_inner_values(problem, x_tilde, inner_block)}));
        transport.send_to_master(
            k, make(*epoch, 0, msg::PartialJacobian{k, sum_inner_jacobians(problem, x_tilde, inner_block)}));

        Message g = transport.worker_receive(k);
        if (g.tag() == MessageTag::kShutdown) return;
        if (g.tag() != MessageTag::kBroadcastInner || g.epoch != *epoch) {
          fail(std::string("expected BroadcastInner, got ") + tag_name(g.tag()));
        }
        Vector inner = g.as<msg::BroadcastInner>().inner;
        require_size(inner, dims.d2, "BroadcastInner");
        transport.send_to_master(
            k, make(*epoch, 0, msg::PartialOuterGrad{k, sum_outer_gradients(problem, inner, outer_block)}));

        Message sm = transport.worker_receive(k);
        if (sm.tag() == MessageTag::kShutdown) return;
        if (sm.tag() != MessageTag::kBroadcastSnapshot || sm.epoch != *epoch) {
          fail(std::string("expected BroadcastSnapshot, got ") + tag_name(sm.tag()));
        }
        const auto& body = sm.as<msg::BroadcastSnapshot>();
        require_shape(body.jacobian, dims.d2, dims.d1, "BroadcastSnapshot Jacobian");
        require_size(body.full_grad, dims.d1, "BroadcastSnapshot gradient");
        if (!bitwise_equal(body.x0, x_tilde)) fail("snapshot start point differs from the broadcast x~");
        snapshot.x_tilde = x_tilde;
        snapshot.inner_value = std::move(inner);
        snapshot.inner_jacobian = Jacobian::compact(body.jacobian);
        snapshot.full_grad = body.full_grad;
        snapshot.epoch = *epoch;
        in_phase2 = true;
        break;
      }
      case MessageTag::kParam: {
        if (!in_phase2) fail("Param before the snapshot");
        if (m.epoch != *epoch) fail("Param for epoch " + std::to_string(m.epoch) + " during epoch " + std::to_string(*epoch));
        const Vector& x = m.as<msg::Param>().x;
        require_size(x, dims.d1, "Param");
        if (config.received_log) config.received_log->push_back({k, m.epoch, m.iteration, x});
        const MiniBatch batch = MiniBatch::sample(rng, dims, config.batch_a, config.batch_b);
        variance_reduced_gradient(problem, snapshot, x, batch, grad);
        if (config.gradient_log) config.gradient_log->push_back({k, m.epoch, m.iteration, grad});
        transport.send_to_master(k, make(m.epoch, m.iteration, msg::Gradient{k, grad}));
        break;
      }
      default:
        fail(std::string("unexpected ") + tag_name(m.tag()));
    }
  }
}

DistributedResult run_distributed(const CompositionProblem& problem, const DistributedOptions& options,
                                  const Vector& x0, const Monitor& monitor) {
  options.validate();
  require_parameter_length(problem, x0);
  const auto dims = problem.dimensions();
  const auto& so = options.solver;
  const std::size_t W = options.workers;
  const std::size_t K = so.inner_iterations;
  const bool scripted = options.scheduler == DistributedScheduler::kScript;

  const Partition partition = Partition::even(dims, W);
  auto transport = make_transport(options.transport, W);
  std::vector<std::vector<IterateLogEntry>> received(W), sent(W);

  std::vector<std::thread> threads;
  threads.reserve(W);
  for (std::size_t k = 0; k < W; ++k) {
    WorkerConfig config{k, partition, so.batch_a, so.batch_b, so.seed, nullptr, nullptr};
    if (options.log_traffic) {
      config.received_log = &received[k];
      config.gradient_log = &sent[k];
    }
    threads.emplace_back([&problem, &transport, config] {
      try {
        worker_loop(problem, config, *transport);
      } catch (const TransportError&) {
        // Master went away; it reports its own error.
      } catch (const std::exception& e) {
        transport->report_failure(config.worker, e.what());
      }
    });
  }
  const auto join_all = [&] {
    for (auto& t : threads) {
      if (t.joinable()) t.join();
    }
  };

  DistributedResult result;
  if (scripted) result.delays.bound = options.script.bound();
  try {
    TrajectoryLogger logger(problem, monitor.reference_value);
    RunClock clock;
    logger.submit(0, 0, 0.0, 0, x0);
    Vector x = x0;
    std::size_t global = 0;
    std::vector<std::size_t> reads(W, 0);
    for (std::size_t s = 1; s <= so.epochs; ++s) {
      const Snapshot snapshot = master_phase1(problem, x, partition, *transport, s, &result.stragglers);
      (void)snapshot;
      result.oracle_queries += snapshot_queries(dims);
      const std::size_t r = anchor_index(so, s);
      Vector anchor;
      transport->broadcast(make(s, 0, msg::Param{x}));
      std::fill(reads.begin(), reads.end(), 0);
      if (options.log_traffic) result.traffic.master_iterates.push_back({0, s, 0, x});

      std::size_t applied = 0;
      for (std::size_t t = 0; t < K; ++t) {
        if (t == r) anchor = x;
        std::size_t w = 0;
        Message m;
        for (;;) {
          if (scripted) {
            w = options.script.pick(s, t, reads);
            m = transport->receive_from(w);
          } else {
            Envelope e = transport->receive_any();
            w = e.worker;
            m = std::move(e.message);
          }
          if (m.tag() == MessageTag::kGradient && m.epoch < s) {
            ++result.stragglers;
            continue;
          }
          break;
        }
        if (m.tag() != MessageTag::kGradient || m.epoch != s) {
          throw ProtocolError("worker " + std::to_string(w) + ": expected Gradient for epoch " + std::to_string(s) +
                              ", got " + tag_name(m.tag()) + " for epoch " + std::to_string(m.epoch));
        }
        const auto& g = m.as<msg::Gradient>();
        check_sender(g.worker, w);
        require_size(g.grad, dims.d1, "Gradient");
        if (m.iteration != reads[w]) {
          throw ProtocolError("worker " + std::to_string(w) + " answered iteration " + std::to_string(m.iteration) +
                              ", expected " + std::to_string(reads[w]));
        }
        for (Eigen::Index c = 0; c < x.size(); ++c) x[c] = x[c] - so.learning_rate * g.grad[c];
        ++applied;
        ++global;
        result.delays.add(DelayRecord{s, t, t - m.iteration, w});
        result.oracle_queries += update_queries(so.batch_a, so.batch_b);
        if (t + 1 < K) {
          transport->send_to_worker(w, make(s, t + 1, msg::Param{x}));
          reads[w] = t + 1;
        }
        if (options.log_traffic) result.traffic.master_iterates.push_back({0, s, t + 1, x});
        if (monitor.on_iterate) monitor.on_iterate(s, t, x);
        if (monitor.record_every != 0 && (t + 1) % monitor.record_every == 0 && t + 1 < K) {
          logger.submit(s, global, clock.seconds(), result.oracle_queries, x);
        }
      }
      result.updates_per_epoch.push_back(applied);
      if (r < K) x = std::move(anchor);
      logger.submit(s, global, clock.seconds(), result.oracle_queries, x);
    }
    transport->broadcast(make(so.epochs, 0, msg::Shutdown{}));
    join_all();
    result.x = std::move(x);
    result.trajectory = logger.finish();
  } catch (...) {
    transport->close();
    join_all();
    throw;
  }

  if (options.log_traffic) {
    for (std::size_t k = 0; k < W; ++k) {
      result.traffic.received.insert(result.traffic.received.end(), received[k].begin(), received[k].end());
      result.traffic.gradients.insert(result.traffic.gradients.end(), sent[k].begin(), sent[k].end());
    }
  }
  return result;
}

}  // namespace asyvrsc
