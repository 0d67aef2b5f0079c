#include <doctest.h>

#include "servo/protocol.hpp"

using namespace servo;

TEST_CASE("player actions round-trip per kind") {
    PlayerAction move;
    move.kind = PlayerAction::Kind::Move;
    move.target = {100, 4, -30};
    move.speed = 6;
    auto m = decode_action(encode_action(move));
    CHECK(m.kind == PlayerAction::Kind::Move);
    CHECK(m.target == move.target);
    CHECK(m.speed == 6);

    PlayerAction brk;
    brk.kind = PlayerAction::Kind::Break;
    brk.target = {-1, 3, 2};
    auto b = decode_action(encode_action(brk));
    CHECK(b.kind == PlayerAction::Kind::Break);
    CHECK(b.target == brk.target);

    PlayerAction place;
    place.kind = PlayerAction::Kind::Place;
    place.target = {5, 4, 5};
    place.place_type = BlockType::Inverter;
    auto p = decode_action(encode_action(place));
    CHECK(p.place_type == BlockType::Inverter);

    PlayerAction stand;
    stand.kind = PlayerAction::Kind::Stand;
    stand.stand_ticks = 37;
    CHECK(decode_action(encode_action(stand)).stand_ticks == 37);

    PlayerAction chat;
    chat.kind = PlayerAction::Kind::Chat;
    chat.text = "hello world";
    CHECK(decode_action(encode_action(chat)).text == "hello world");

    PlayerAction inv;
    inv.kind = PlayerAction::Kind::SetInventory;
    inv.item = 3;
    CHECK(decode_action(encode_action(inv)).item == 3);
}

TEST_CASE("action decoding rejects junk") {
    CHECK_THROWS_AS(decode_action({0}), WireError);    // kind 0
    CHECK_THROWS_AS(decode_action({9}), WireError);    // kind out of range
    CHECK_THROWS_AS(decode_action({}), WireError);     // empty

    PlayerAction move;
    move.kind = PlayerAction::Kind::Move;
    move.target = {0, 0, 0};
    move.speed = 9;  // encoder does not validate, decoder must
    CHECK_THROWS_AS(decode_action(encode_action(move)), WireError);

    auto bytes = encode_action(PlayerAction{});
    bytes.push_back(0xff);
    CHECK_THROWS_AS(decode_action(bytes), WireError);
}

TEST_CASE("server messages round-trip") {
    JoinMsg j{"botling"};
    CHECK(decode_join(encode_join(j)).name == "botling");

    WelcomeMsg w;
    w.player_id = 12;
    w.tick_rate_hz = 20;
    w.spawn = {0, 5, 0};
    auto wb = decode_welcome(encode_welcome(w));
    CHECK(wb.player_id == 12);
    CHECK(wb.tick_rate_hz == 20);
    CHECK(wb.spawn == w.spawn);

    BlockChangeMsg bc;
    bc.pos = {-7, 9, 300};
    bc.block = make_block(BlockType::Wire, 13);
    bc.tick = 555;
    auto bcb = decode_block_change(encode_block_change(bc));
    CHECK(bcb.pos == bc.pos);
    CHECK(bcb.block == bc.block);
    CHECK(bcb.tick == 555);

    AvatarPositionsMsg av;
    av.tick = 99;
    av.avatars = {{1, {0, 4, 0}}, {2, {16, 4, -16}}};
    auto avb = decode_avatar_positions(encode_avatar_positions(av));
    CHECK(avb.tick == 99);
    CHECK(avb.avatars == av.avatars);

    ChatBroadcastMsg ch;
    ch.from = 3;
    ch.text = "gg";
    auto chb = decode_chat_broadcast(encode_chat_broadcast(ch));
    CHECK(chb.from == 3);
    CHECK(chb.text == "gg");
}

TEST_CASE("message decoders reject trailing bytes") {
    auto check_trailing = [](std::vector<uint8_t> bytes, auto decode) {
        bytes.push_back(0);
        CHECK_THROWS_AS(decode(bytes), WireError);
    };
    check_trailing(encode_join({"x"}), decode_join);
    check_trailing(encode_welcome({}), decode_welcome);
    check_trailing(encode_block_change({}), decode_block_change);
    check_trailing(encode_avatar_positions({}), decode_avatar_positions);
    check_trailing(encode_chat_broadcast({}), decode_chat_broadcast);
}

TEST_CASE("frames carry a length, a tag and the payload") {
    std::vector<uint8_t> payload{1, 2, 3};
    auto frame = encode_frame(MsgTag::BlockChange, payload);
    REQUIRE(frame.size() == 4 + 1 + 3);
    CHECK(frame[0] == 4);  // length includes the tag byte
    CHECK(frame[1] == 0);
    CHECK(frame[4] == static_cast<uint8_t>(MsgTag::BlockChange));
    CHECK(frame[5] == 1);
}

TEST_CASE("frame reader reassembles split and concatenated frames") {
    FrameReader r;
    auto f1 = encode_frame(MsgTag::Join, encode_join({"a"}));
    auto f2 = encode_frame(MsgTag::Action, encode_action(PlayerAction{}));

    // Feed one byte at a time.
    for (uint8_t b : f1) {
        CHECK(!r.next().has_value());
        r.feed(&b, 1);
    }
    auto got = r.next();
    REQUIRE(got.has_value());
    CHECK(got->first == MsgTag::Join);
    CHECK(decode_join(got->second).name == "a");
    CHECK(!r.next().has_value());

    // Feed two frames in one buffer.
    std::vector<uint8_t> both(f1);
    both.insert(both.end(), f2.begin(), f2.end());
    r.feed(both.data(), both.size());
    auto g1 = r.next();
    auto g2 = r.next();
    REQUIRE(g1.has_value());
    REQUIRE(g2.has_value());
    CHECK(g1->first == MsgTag::Join);
    CHECK(g2->first == MsgTag::Action);
    CHECK(!r.next().has_value());
}

TEST_CASE("frame reader rejects absurd lengths") {
    FrameReader r;
    std::vector<uint8_t> evil{0xff, 0xff, 0xff, 0xff};
    r.feed(evil.data(), evil.size());
    CHECK_THROWS_AS(r.next(), WireError);

    FrameReader r2;
    std::vector<uint8_t> zero{0, 0, 0, 0};
    r2.feed(zero.data(), zero.size());
    CHECK_THROWS_AS(r2.next(), WireError);
}
