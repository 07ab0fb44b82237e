#include "mlsim/error.hpp"
#include "mlsim/world.hpp"

#include <gtest/gtest.h>

using namespace mlsim;

namespace
{
    Bytes bytes_of(std::initializer_list<int> v)
    {
        Bytes b;
        for (int x : v)
        {
            b.push_back(static_cast<std::byte>(x));
        }
        return b;
    }

    World make_world(int n = 16, Iter iters = 30)
    {
        return World(WorldConfig{n, iters, 4, 1});
    }
}

TEST(World, SendBuffersAndRecvReturnsSameBytes)
{
    World w = make_world();
    const auto payload = bytes_of({1, 2, 3, 250});
    EXPECT_EQ(w.post_send(0, 1, 7, payload, 1, 0), SendOutcome::Buffered);
    EXPECT_EQ(w.process(1).inbox.at({0, 7}).size(), 1u);
    auto out = w.post_recv(1, 0, 7);
    ASSERT_EQ(out.status, RecvStatus::Data);
    EXPECT_EQ(out.message.payload, payload);
    EXPECT_EQ(out.message.src, 0);
    EXPECT_EQ(out.message.iter, 1);
    EXPECT_TRUE(w.process(1).inbox.at({0, 7}).empty());
}

TEST(World, MatchingIsFifoPerSourceAndTag)
{
    World w = make_world(4);
    w.post_send(0, 1, 5, bytes_of({1}), 1, 0);
    w.post_send(0, 1, 6, bytes_of({2}), 1, 1);
    w.post_send(0, 1, 5, bytes_of({3}), 2, 0);
    EXPECT_EQ(w.post_recv(1, 0, 6).message.payload, bytes_of({2}));
    EXPECT_EQ(w.post_recv(1, 0, 5).message.payload, bytes_of({1}));
    EXPECT_EQ(w.post_recv(1, 0, 5).message.payload, bytes_of({3}));
    EXPECT_EQ(w.post_recv(1, 0, 5).status, RecvStatus::Pending);
}

TEST(World, SendToDeadRankIsBufferedAndLost)
{
    Trace t;
    World w(WorldConfig{16, 30, 4, 1}, &t);
    w.kill(2);
    EXPECT_EQ(w.post_send(0, 2, 1, bytes_of({9}), 13, 0), SendOutcome::Buffered);
    EXPECT_TRUE(w.process(2).inbox.empty());
    EXPECT_EQ(t.events().back().outcome, "lost");
}

TEST(World, RecvFromDeadPeerDetectsOnceDetectorArmed)
{
    World w = make_world();
    w.kill(2);
    EXPECT_EQ(w.post_recv(0, 2, 1).status, RecvStatus::Pending);
    EXPECT_FALSE(w.revoked());
    w.arm_detector();
    EXPECT_EQ(w.post_recv(0, 2, 1).status, RecvStatus::FailureDetected);
    EXPECT_TRUE(w.revoked());
    EXPECT_TRUE(w.process(0).observed_revocation);
}

TEST(World, BufferedMessageStillDeliveredAfterUnrelatedFailure)
{
    World w = make_world();
    w.post_send(5, 4, 1, bytes_of({4}), 13, 0);
    w.kill(2);
    w.arm_detector();
    auto out = w.post_recv(4, 5, 1);
    EXPECT_EQ(out.status, RecvStatus::Data);
    EXPECT_FALSE(w.process(4).observed_revocation);
}

TEST(World, EagerBufferAsymmetry)
{
    // The send to 0 succeeds; 2 dies before receiving 0's reply, and the
    // receive of 0 reports the failure.
    World w = make_world();
    EXPECT_EQ(w.post_send(2, 0, 1, bytes_of({1}), 13, 0), SendOutcome::Buffered);
    EXPECT_EQ(w.post_send(0, 2, 1, bytes_of({2}), 13, 0), SendOutcome::Buffered);
    w.kill(2);
    w.arm_detector();
    EXPECT_EQ(w.post_recv(0, 2, 1).status, RecvStatus::Data);
    EXPECT_EQ(w.post_recv(0, 2, 2).status, RecvStatus::FailureDetected);
}

TEST(World, RevocationObservedOnlyInsideCommunicationCalls)
{
    World w = make_world();
    w.kill(2);
    w.arm_detector();
    w.post_recv(0, 2, 1);
    EXPECT_TRUE(w.revoked());
    EXPECT_FALSE(w.process(3).observed_revocation);
    EXPECT_EQ(w.post_send(3, 1, 1, bytes_of({1}), 1, 0), SendOutcome::RevokedError);
    EXPECT_TRUE(w.process(3).observed_revocation);
    EXPECT_TRUE(w.process(1).inbox.empty());
    EXPECT_EQ(w.post_recv(5, 4, 1).status, RecvStatus::FailureDetected);
}

TEST(World, BarrierCompletesWhenAllArrive)
{
    World w = make_world(3);
    w.barrier_arrive(0, 10);
    w.barrier_arrive(1, 10);
    EXPECT_EQ(w.barrier_poll(0, 10), RecvStatus::Pending);
    w.barrier_arrive(2, 10);
    EXPECT_EQ(w.barrier_poll(0, 10), RecvStatus::Data);
    EXPECT_TRUE(w.barrier_complete(10));
}

TEST(World, BarrierDetectsDeadRank)
{
    World w = make_world(3);
    w.barrier_arrive(0, 10);
    w.kill(1);
    EXPECT_EQ(w.barrier_poll(0, 10), RecvStatus::Pending);
    w.arm_detector();
    EXPECT_EQ(w.barrier_poll(0, 10), RecvStatus::FailureDetected);
}

TEST(World, InjectFailureValidation)
{
    World w = make_world(16, 30);
    EXPECT_THROW(w.inject_failure({2, 31, 0}), ConfigError);
    EXPECT_THROW(w.inject_failure({2, 0, 0}), ConfigError);
    EXPECT_THROW(w.inject_failure({16, 3, 0}), ConfigError);
    EXPECT_THROW(w.inject_failure({2, 3, 4}), ConfigError);
    w.inject_failure({2, 13, 1});
    EXPECT_FALSE(w.take_failure(2, 13, 0));
    EXPECT_TRUE(w.take_failure(2, 13, 1));
    EXPECT_FALSE(w.take_failure(2, 13, 1));
    w.kill(3);
    EXPECT_THROW(w.inject_failure({3, 5, 0}), ConfigError);
    w.mark_finished();
    EXPECT_THROW(w.inject_failure({4, 5, 0}), ConfigError);
}

TEST(World, RecoverRespawnsDeadRanksAndAdvancesEpoch)
{
    World w = make_world();
    w.post_send(0, 1, 1, bytes_of({1}), 1, 0);
    w.kill(0);
    w.kill(8);
    w.arm_detector();
    w.post_recv(4, 0, 1);
    ASSERT_TRUE(w.revoked());
    w.recover();
    EXPECT_EQ(w.epoch(), 1u);
    EXPECT_EQ(w.process(0).status, ProcStatus::Respawned);
    EXPECT_EQ(w.process(8).status, ProcStatus::Respawned);
    EXPECT_TRUE(w.dead_ranks().empty());
    EXPECT_TRUE(w.process(1).inbox.empty());
    EXPECT_FALSE(w.process(4).observed_revocation);
    EXPECT_FALSE(w.revoked());
    EXPECT_EQ(w.post_send(0, 1, 1, bytes_of({1}), 1, 0), SendOutcome::Buffered);
}

TEST(World, RecoverPreconditions)
{
    World w = make_world();
    EXPECT_THROW(w.recover(), std::logic_error);
    w.kill(2);
    EXPECT_THROW(w.recover(), std::logic_error);
}

TEST(World, RejectsBadConfig)
{
    EXPECT_THROW(World(WorldConfig{0, 1, 1, 1}), ConfigError);
    EXPECT_THROW(World(WorldConfig{1, 0, 1, 1}), ConfigError);
}
