#include "mlsim/transaction.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <vector>

using namespace mlsim;

namespace
{
    struct Vecs
    {
        std::vector<double> z;
        std::vector<double> r;
    };

    bool bitwise_equal(const std::vector<double> &a, const std::vector<double> &b)
    {
        return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    }
}

TEST(Transaction, CommitPublishesShadowAndCounts)
{
    Transaction<Vecs> t(Vecs{{1.0, 2.0}, {3.0, 4.0}});
    t.begin();
    t.working().z[0] = 5.0;
    EXPECT_EQ(t.committed().z[0], 1.0);
    t.commit();
    EXPECT_EQ(t.committed().z[0], 5.0);
    EXPECT_EQ(t.iter(), 1);
    EXPECT_FALSE(t.open());
}

TEST(Transaction, CommitRightAfterBeginLeavesDataUnchanged)
{
    Transaction<Vecs> t(Vecs{{1.0}, {2.0}});
    t.begin();
    t.commit();
    EXPECT_EQ(t.committed().z, std::vector<double>{1.0});
    EXPECT_EQ(t.iter(), 1);
}

TEST(Transaction, TenCommits)
{
    Transaction<Vecs> t;
    for (int i = 0; i < 10; ++i)
    {
        t.begin();
        t.commit();
    }
    EXPECT_EQ(t.iter(), 10);
}

TEST(Transaction, AbortRestoresBitwise)
{
    const Vecs init{{0.1, -0.0, 1e-300}, {3.0, 7.5, -2.25}};
    Transaction<Vecs> t(init, 4);
    t.begin();
    for (auto &v : t.working().z)
    {
        v *= 3.0;
    }
    t.working().r.push_back(1.0);
    t.abort();
    EXPECT_TRUE(bitwise_equal(t.committed().z, init.z));
    EXPECT_TRUE(bitwise_equal(t.committed().r, init.r));
    EXPECT_EQ(t.iter(), 4);
    EXPECT_FALSE(t.open());
}

TEST(Transaction, EmptyStateBeginAbort)
{
    Transaction<Vecs> t;
    t.begin();
    t.abort();
    EXPECT_FALSE(t.open());
    EXPECT_EQ(t.iter(), 0);
    EXPECT_TRUE(t.committed().z.empty());
}

TEST(Transaction, LogicErrors)
{
    Transaction<Vecs> t;
    EXPECT_THROW(t.commit(), std::logic_error);
    EXPECT_THROW(t.abort(), std::logic_error);
    EXPECT_THROW(t.working(), std::logic_error);
    t.begin();
    EXPECT_THROW(t.begin(), std::logic_error);
}

TEST(Transaction, BypassLosesAbortGuarantee)
{
    Transaction<Vecs> t(Vecs{{1.0}, {1.0}});
    t.set_bypass(true);
    t.begin();
    t.working().z[0] = 2.0;
    t.abort();
    EXPECT_EQ(t.committed().z[0], 2.0);
}

TEST(Transaction, ResetReplacesState)
{
    Transaction<Vecs> t(Vecs{{1.0}, {1.0}});
    t.begin();
    t.reset(Vecs{{9.0}, {8.0}}, 20);
    EXPECT_FALSE(t.open());
    EXPECT_EQ(t.iter(), 20);
    EXPECT_EQ(t.committed().r[0], 8.0);
}
