#include "mlsim/error.hpp"
#include "mlsim/protocol.hpp"

#include <gtest/gtest.h>

using namespace mlsim;

// Iteration numbers here are committed counts; the message label of an
// iteration is committed + 1.

namespace
{
    Bytes payload_for(Iter it)
    {
        return Bytes(16, static_cast<std::byte>(it));
    }

    World world16()
    {
        return World(WorldConfig{16, 30, 4, 1});
    }
}

TEST(SendWrapper, NormalSendIsLogged)
{
    World w = world16();
    ProtocolState p(0, 16, 10, 10, 10);
    p.set_all_peers(12);
    auto res = p.send(w, ScheduledSend{1, 100, 0, 0, 0}, 13, [] { return payload_for(13); });
    EXPECT_EQ(res.action, SendAction::SentAndLogged);
    EXPECT_EQ(res.outcome, SendOutcome::Buffered);
    EXPECT_EQ(p.log().size(), 1u);
    EXPECT_EQ(w.process(1).inbox.at({0, 100}).size(), 1u);
}

TEST(SendWrapper, SurvivorAheadReplaysFromLog)
{
    // Survivor committed 13, destination back at 12: label 13 is replayed.
    World w = world16();
    ProtocolState p(0, 16, 10, 10, 10);
    p.log().append(13, 2, 0, payload_for(13));
    p.peer_iters()[0] = 13;
    p.peer_iters()[2] = 12;
    auto res = p.send(w, ScheduledSend{2, 100, 0, 0, 0}, 13, [] () -> Bytes { throw std::logic_error("no"); });
    EXPECT_EQ(res.action, SendAction::Replayed);
    EXPECT_EQ(w.process(2).inbox.at({0, 100}).front().payload, payload_for(13));
    EXPECT_EQ(p.replayed(), 1u);
}

TEST(SendWrapper, RestartedRankSkipsSendsIntoThePast)
{
    // Restarted at 10, peer already committed 13: labels 11..13 are not sent.
    World w = world16();
    ProtocolState p(2, 16, 10, 10, 10);
    p.peer_iters()[0] = 13;
    for (Iter label = 11; label <= 13; ++label)
    {
        auto res = p.send(w, ScheduledSend{0, 100, 0, 0, 0}, label, [label] { return payload_for(label); });
        EXPECT_EQ(res.action, SendAction::SkippedFuture);
        p.on_commit(label);
    }
    EXPECT_TRUE(w.process(0).inbox.empty());
    auto res = p.send(w, ScheduledSend{0, 100, 0, 0, 0}, 14, [] { return payload_for(14); });
    EXPECT_EQ(res.action, SendAction::SentAndLogged);
    EXPECT_EQ(p.log().size(), 4u);
}

TEST(SendWrapper, IrrelevantReplayIsSkipped)
{
    World w = world16();
    ProtocolState p(0, 16, 10, 10, 10);
    p.set_all_peers(13);
    auto res = p.send(w, ScheduledSend{1, 100, 0, 0, 0}, 12, [] () -> Bytes { throw std::logic_error("no"); });
    EXPECT_EQ(res.action, SendAction::SkippedIrrelevant);
}

TEST(SendWrapper, MissingPayloadRaises)
{
    World w = world16();
    ProtocolState p(0, 16, 10, 2, 10);
    p.peer_iters()[0] = 13;
    p.peer_iters()[2] = 10;
    EXPECT_THROW(p.send(w, ScheduledSend{2, 100, 0, 0, 0}, 13, [] { return Bytes{}; }), MissingLogEntry);
}

TEST(SendWrapper, RevokedCommunicatorReported)
{
    World w = world16();
    w.kill(5);
    w.arm_detector();
    w.post_recv(1, 5, 0);
    ProtocolState p(0, 16, 10, 10, 0);
    auto res = p.send(w, ScheduledSend{1, 100, 0, 0, 0}, 1, [] { return payload_for(1); });
    EXPECT_EQ(res.outcome, SendOutcome::RevokedError);
}

TEST(FrontLine, MinMax)
{
    auto f = FrontLine::from({13, 13, 10, 12, 13});
    EXPECT_EQ(f.minit, 10);
    EXPECT_EQ(f.maxit, 13);
}

TEST(FrontLine, GatherReadsCurrentIters)
{
    World w = world16();
    for (Rank r = 0; r < 16; ++r)
    {
        w.set_current_iter(r, 7);
    }
    auto f = gather_front_line(w);
    EXPECT_EQ(f.minit, 7);
    EXPECT_EQ(f.maxit, 7);
    EXPECT_EQ(f.iters.size(), 16u);
}

TEST(DecideRollback, GreenAndRedZone)
{
    // CP_INT = 4, LOG_SIZE = 2, checkpoint at 8.
    EXPECT_EQ(decide_rollback(FrontLine::from({8, 9, 10}), 8, 2), RollbackMode::Local);
    EXPECT_EQ(decide_rollback(FrontLine::from({8, 9, 11}), 8, 2), RollbackMode::Global);
    for (Iter maxit = 8; maxit <= 12; ++maxit)
    {
        EXPECT_EQ(decide_rollback(FrontLine::from({8, maxit}), 8, 4), RollbackMode::Local);
    }
}

TEST(DecideRollback, MonotoneInLogSize)
{
    for (Iter maxit = 0; maxit <= 20; ++maxit)
    {
        bool was_local = false;
        for (Iter ls = 1; ls <= 20; ++ls)
        {
            const bool local = decide_rollback(FrontLine::from({0, maxit}), 0, ls) == RollbackMode::Local;
            EXPECT_TRUE(local || !was_local);
            was_local = local;
        }
    }
}

TEST(Replay, SurvivorResendsMissingIterations)
{
    // Rank 0 committed 13, rank 2 restarted from checkpoint 10.
    World w = world16();
    ProtocolState p(0, 16, 10, 10, 10);
    const std::vector<ScheduledSend> schedule{{1, 100, 0, 0, 0}, {2, 101, 0, 0, 0}, {0, 200, 0, 1, 0}};
    for (Iter label = 11; label <= 13; ++label)
    {
        for (const auto &s : schedule)
        {
            p.log().append(label, s.dst, s.seq, payload_for(label * 10 + s.dst));
        }
    }
    std::vector<Iter> iters(16, 13);
    iters[2] = 10;
    const auto front = FrontLine::from(iters);
    p.peer_iters() = front.iters;
    EXPECT_EQ(replay(p, w, front, schedule), 3u);
    const auto &q = w.process(2).inbox.at({0, 101});
    ASSERT_EQ(q.size(), 3u);
    for (Iter label = 11; label <= 13; ++label)
    {
        EXPECT_EQ(q[static_cast<std::size_t>(label - 11)].iter, label);
        EXPECT_EQ(q[static_cast<std::size_t>(label - 11)].payload, payload_for(label * 10 + 2));
    }
    EXPECT_TRUE(w.process(1).inbox.empty());
}

TEST(Replay, NothingToDoAtMinimum)
{
    World w = world16();
    ProtocolState p(0, 16, 10, 10, 10);
    std::vector<Iter> iters(16, 12);
    iters[2] = 10;
    iters[0] = 10;
    const auto front = FrontLine::from(iters);
    p.peer_iters() = front.iters;
    EXPECT_EQ(replay(p, w, front, {{2, 100, 0, 0, 0}}), 0u);
}
