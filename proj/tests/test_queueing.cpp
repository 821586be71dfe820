#include <catch_amalgamated.hpp>

#include "uqsim/queueing.hpp"

using namespace uqsim;

TEST_CASE("single queue keeps FIFO order and serves one job per batch", "[queueing]") {
    StageQueue q(QueueType::single, 1);
    q.enqueue(10);
    q.enqueue(11);
    REQUIRE(q.dequeue_batch() == std::vector<std::uint32_t>{10});
    REQUIRE(q.dequeue_batch() == std::vector<std::uint32_t>{11});
    REQUIRE(q.empty());
}

TEST_CASE("epoll queue activates one subqueue per connection", "[queueing]") {
    StageQueue q(QueueType::epoll, 4);
    q.enqueue(1, 0);
    q.enqueue(2, 1);
    REQUIRE(q.active_connections() == std::vector<int>{0, 1});
}

TEST_CASE("epoll batch takes the first N of each active subqueue", "[queueing]") {
    StageQueue q(QueueType::epoll, 2);
    q.enqueue(0xa, 0);
    q.enqueue(0xb, 0);
    q.enqueue(0xc, 0);
    q.enqueue(0xd, 1);
    REQUIRE(q.dequeue_batch() == std::vector<std::uint32_t>{0xa, 0xb, 0xd});
    REQUIRE(q.subqueue_size(0) == 1);
    REQUIRE(q.dequeue_batch() == std::vector<std::uint32_t>{0xc});
}

TEST_CASE("socket batch drains a single ready connection, round-robin", "[queueing]") {
    StageQueue q(QueueType::socket, 2);
    q.enqueue(0xa, 0);
    q.enqueue(0xb, 0);
    q.enqueue(0xc, 0);
    q.enqueue(0xd, 1);
    REQUIRE(q.dequeue_batch() == std::vector<std::uint32_t>{0xa, 0xb});
    // conn0 still holds a job, but the cursor moved on to conn1.
    REQUIRE(q.dequeue_batch() == std::vector<std::uint32_t>{0xd});
    REQUIRE(q.dequeue_batch() == std::vector<std::uint32_t>{0xc});
}

TEST_CASE("dequeue on an empty queue raises EmptyQueueError", "[queueing]") {
    StageQueue q(QueueType::single, 1);
    REQUIRE_THROWS_AS(q.dequeue_batch(), EmptyQueueError);
}

TEST_CASE("epoll and socket queues require a connection id", "[queueing]") {
    StageQueue q(QueueType::epoll, 2);
    REQUIRE_THROWS_AS(q.enqueue(1), Error);
}
