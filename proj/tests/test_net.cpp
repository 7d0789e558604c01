#include <catch2/catch_amalgamated.hpp>
#include <thread>

#include "privimpute/net.hpp"

using namespace privimpute;

TEST_CASE("frame round trip counts prefix bytes", "[net]") {
  auto [a, b] = net::make_in_process_pair();
  Rng rng(1);
  Bytes payload(1024);
  rng.fill(payload.data(), payload.size());
  a->send_frame(payload);
  Bytes got = b->recv_frame();
  CHECK(got == payload);
  CHECK(a->sent_bytes() == 1028);
  CHECK(b->received_bytes() == 1028);
}

TEST_CASE("zero-length frames are legal", "[net]") {
  auto [a, b] = net::make_in_process_pair();
  a->send_frame({});
  Bytes got = b->recv_frame();
  CHECK(got.empty());
  CHECK(b->received_bytes() == 4);
}

TEST_CASE("frames arrive in order", "[net]") {
  auto [a, b] = net::make_in_process_pair();
  Bytes x = {1, 2, 3}, y = {4, 5};
  a->send_frame(x);
  a->send_frame(y);
  CHECK(b->recv_frame() == x);
  CHECK(b->recv_frame() == y);
}

TEST_CASE("snapshots accumulate and deltas reflect traffic", "[net]") {
  auto [a, b] = net::make_in_process_pair();
  auto s1 = a->snapshot_counters("setup");
  auto s2 = a->snapshot_counters("setup");
  CHECK(s1.sent_bytes == s2.sent_bytes);
  CHECK(s1.received_bytes == s2.received_bytes);
  Bytes payload(100);
  a->send_frame(payload);
  auto s3 = a->snapshot_counters("query");
  CHECK(s3.sent_bytes - s2.sent_bytes == 104);
  std::string csv = a->transcript_csv();
  CHECK(csv.rfind("phase,dir,bytes,rounds,wall_nanos\n", 0) == 0);
  (void)b;
}

TEST_CASE("typed messages check their tag", "[net]") {
  auto [a, b] = net::make_in_process_pair();
  Bytes body = {9, 9};
  a->send_msg(net::MsgType::oprf_query, body);
  CHECK_THROWS_AS(b->recv_msg(net::MsgType::opprf_hints), net::ChannelError);
}

TEST_CASE("recv timeout raises", "[net]") {
  auto [a, b] = net::make_in_process_pair(std::chrono::milliseconds(50));
  CHECK_THROWS_AS(b->recv_frame(), net::ChannelError);
  (void)a;
}

TEST_CASE("peer disconnect unblocks recv", "[net]") {
  auto [a, b] = net::make_in_process_pair();
  std::thread t([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    a.reset();
  });
  CHECK_THROWS_AS(b->recv_frame(), net::ChannelError);
  t.join();
}

TEST_CASE("socket backend matches in-process accounting", "[net]") {
  u16 port = 0;
  std::unique_ptr<net::Channel> server;
  std::thread t([&] { server = net::SocketChannel::listen(0, 5000, &port); });
  while (port == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  auto client = net::SocketChannel::connect("127.0.0.1", port, 5000);
  t.join();

  Rng rng(3);
  Bytes payload(2000);
  rng.fill(payload.data(), payload.size());
  client->send_frame(payload);
  Bytes got = server->recv_frame();
  CHECK(got == payload);
  server->send_frame(got);
  CHECK(client->recv_frame() == payload);
  CHECK(client->sent_bytes() == 2004);
  CHECK(client->received_bytes() == 2004);
  CHECK(server->sent_bytes() == client->received_bytes());
  CHECK(client->rounds() == 1);
}

TEST_CASE("rounds count send-to-recv transitions", "[net]") {
  auto [a, b] = net::make_in_process_pair();
  for (int i = 0; i < 3; i++) {
    a->send_frame({{1}});
    b->recv_frame();
    b->send_frame({{2}});
    a->recv_frame();
  }
  CHECK(a->rounds() == 3);
}
