#ifndef UQSIM_QUEUEING_HPP
#define UQSIM_QUEUEING_HPP

#include <cstdint>
#include <deque>
#include <vector>

#include "uqsim/config.hpp"
#include "uqsim/errors.hpp"

namespace uqsim {

// A stage's job queue. Three disciplines:
//   single - one FIFO; a consumer invocation takes the head job.
//   epoll  - one subqueue per connection; an invocation returns the first
//            N jobs of each active (non-empty) subqueue.
//   socket - one subqueue per connection; an invocation returns the first
//            N jobs of a single ready connection, round-robin across
//            non-empty connections.
class StageQueue {
  public:
    StageQueue() = default;
    StageQueue(QueueType type, int batch_bound)
        : type_(type), batch_bound_(batch_bound < 1 ? 1 : batch_bound) {}

    QueueType type() const { return type_; }
    int batch_bound() const { return batch_bound_; }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    void enqueue(std::uint32_t job, int connection_id = -1) {
        if (type_ == QueueType::single) {
            single_.push_back(job);
        } else {
            if (connection_id < 0)
                throw Error("connection_id required for " + to_string(type_) + " queues");
            if (static_cast<std::size_t>(connection_id) >= sub_.size())
                sub_.resize(connection_id + 1);
            sub_[connection_id].push_back(job);
        }
        ++size_;
    }

    // Removes and returns one batch per the discipline. Relative FIFO order
    // within each connection is preserved.
    std::vector<std::uint32_t> dequeue_batch() {
        if (size_ == 0) throw EmptyQueueError("dequeue_batch on empty queue");
        std::vector<std::uint32_t> batch;
        switch (type_) {
            case QueueType::single:
                batch.push_back(single_.front());
                single_.pop_front();
                --size_;
                break;
            case QueueType::epoll:
                for (auto& q : sub_) {
                    int n = 0;
                    while (!q.empty() && n < batch_bound_) {
                        batch.push_back(q.front());
                        q.pop_front();
                        --size_;
                        ++n;
                    }
                }
                break;
            case QueueType::socket: {
                const std::size_t n_sub = sub_.size();
                for (std::size_t probe = 0; probe < n_sub; ++probe) {
                    std::size_t idx = (cursor_ + probe) % n_sub;
                    if (sub_[idx].empty()) continue;
                    int n = 0;
                    while (!sub_[idx].empty() && n < batch_bound_) {
                        batch.push_back(sub_[idx].front());
                        sub_[idx].pop_front();
                        --size_;
                        ++n;
                    }
                    cursor_ = (idx + 1) % n_sub;
                    break;
                }
                break;
            }
        }
        return batch;
    }

    // Connections with a non-empty subqueue, in subqueue order.
    std::vector<int> active_connections() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < sub_.size(); ++i)
            if (!sub_[i].empty()) out.push_back(static_cast<int>(i));
        return out;
    }

    std::size_t subqueue_size(int connection_id) const {
        if (connection_id < 0 || static_cast<std::size_t>(connection_id) >= sub_.size()) return 0;
        return sub_[connection_id].size();
    }

  private:
    QueueType type_ = QueueType::single;
    int batch_bound_ = 1;
    std::deque<std::uint32_t> single_;
    std::vector<std::deque<std::uint32_t>> sub_;
    std::size_t cursor_ = 0;
    std::size_t size_ = 0;
};

}  // namespace uqsim

#endif
