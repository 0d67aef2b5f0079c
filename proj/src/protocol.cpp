#include "servo/protocol.hpp"

namespace servo {

std::vector<uint8_t> encode_frame(MsgTag tag, const std::vector<uint8_t>& payload) {
    ByteWriter w;
    w.put_u32(static_cast<uint32_t>(payload.size() + 1));
    w.put_u8(static_cast<uint8_t>(tag));
    w.put_bytes(payload);
    return w.take();
}

void FrameReader::feed(const uint8_t* data, size_t n) {
    if (consumed_ > 0 && consumed_ == buf_.size()) {
        buf_.clear();
        consumed_ = 0;
    }
    buf_.insert(buf_.end(), data, data + n);
}

std::optional<std::pair<MsgTag, std::vector<uint8_t>>> FrameReader::next() {
    size_t avail = buf_.size() - consumed_;
    if (avail < 4) return std::nullopt;
    const uint8_t* p = buf_.data() + consumed_;
    uint32_t len = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                   (static_cast<uint32_t>(p[2]) << 16) |
                   (static_cast<uint32_t>(p[3]) << 24);
    if (len == 0 || len > kMaxFrameBytes) throw WireError("frame length out of range");
    if (avail < 4 + static_cast<size_t>(len)) return std::nullopt;
    MsgTag tag = static_cast<MsgTag>(p[4]);
    std::vector<uint8_t> payload(p + 5, p + 4 + len);
    consumed_ += 4 + len;
    if (consumed_ == buf_.size()) {
        buf_.clear();
        consumed_ = 0;
    } else if (consumed_ > (1u << 16)) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(consumed_));
        consumed_ = 0;
    }
    return std::make_pair(tag, std::move(payload));
}

static void put_pos(ByteWriter& w, const Pos& p) {
    w.put_i32(p.x);
    w.put_i32(p.y);
    w.put_i32(p.z);
}

static Pos get_pos(ByteReader& r) {
    Pos p;
    p.x = r.get_i32();
    p.y = r.get_i32();
    p.z = r.get_i32();
    return p;
}

std::vector<uint8_t> encode_action(const PlayerAction& a) {
    ByteWriter w;
    w.put_u8(static_cast<uint8_t>(a.kind));
    switch (a.kind) {
        case PlayerAction::Kind::Move:
            put_pos(w, a.target);
            w.put_u8(a.speed);
            break;
        case PlayerAction::Kind::Break:
            put_pos(w, a.target);
            break;
        case PlayerAction::Kind::Place:
            put_pos(w, a.target);
            w.put_u8(static_cast<uint8_t>(a.place_type));
            break;
        case PlayerAction::Kind::Stand:
            w.put_u16(a.stand_ticks);
            break;
        case PlayerAction::Kind::Chat:
            w.put_string(a.text);
            break;
        case PlayerAction::Kind::SetInventory:
            w.put_u16(a.item);
            break;
    }
    return w.take();
}

PlayerAction decode_action(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    PlayerAction a;
    uint8_t kind = r.get_u8();
    if (kind < 1 || kind > 6) throw WireError("unknown action kind");
    a.kind = static_cast<PlayerAction::Kind>(kind);
    switch (a.kind) {
        case PlayerAction::Kind::Move:
            a.target = get_pos(r);
            a.speed = r.get_u8();
            if (a.speed < 1 || a.speed > 8) throw WireError("move speed out of range");
            break;
        case PlayerAction::Kind::Break:
            a.target = get_pos(r);
            break;
        case PlayerAction::Kind::Place: {
            a.target = get_pos(r);
            uint8_t t = r.get_u8();
            if (t >= kBlockTypeCount) throw WireError("place block type invalid");
            a.place_type = static_cast<BlockType>(t);
            break;
        }
        case PlayerAction::Kind::Stand:
            a.stand_ticks = r.get_u16();
            break;
        case PlayerAction::Kind::Chat:
            a.text = r.get_string();
            break;
        case PlayerAction::Kind::SetInventory:
            a.item = r.get_u16();
            break;
    }
    if (!r.done()) throw WireError("action has trailing bytes");
    return a;
}

std::vector<uint8_t> encode_join(const JoinMsg& m) {
    ByteWriter w;
    w.put_string(m.name);
    return w.take();
}

JoinMsg decode_join(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    JoinMsg m;
    m.name = r.get_string();
    if (!r.done()) throw WireError("join has trailing bytes");
    return m;
}

std::vector<uint8_t> encode_welcome(const WelcomeMsg& m) {
    ByteWriter w;
    w.put_u32(m.player_id);
    w.put_u8(m.tick_rate_hz);
    put_pos(w, m.spawn);
    return w.take();
}

WelcomeMsg decode_welcome(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    WelcomeMsg m;
    m.player_id = r.get_u32();
    m.tick_rate_hz = r.get_u8();
    m.spawn = get_pos(r);
    if (!r.done()) throw WireError("welcome has trailing bytes");
    return m;
}

std::vector<uint8_t> encode_block_change(const BlockChangeMsg& m) {
    ByteWriter w;
    put_pos(w, m.pos);
    w.put_u8(static_cast<uint8_t>(m.block.type));
    w.put_u8(m.block.power);
    w.put_i64(m.tick);
    return w.take();
}

BlockChangeMsg decode_block_change(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    BlockChangeMsg m;
    m.pos = get_pos(r);
    uint8_t t = r.get_u8();
    if (t >= kBlockTypeCount) throw WireError("block change type invalid");
    m.block.type = static_cast<BlockType>(t);
    m.block.power = r.get_u8();
    m.tick = r.get_i64();
    if (!r.done()) throw WireError("block change has trailing bytes");
    return m;
}

std::vector<uint8_t> encode_avatar_positions(const AvatarPositionsMsg& m) {
    ByteWriter w;
    w.put_i64(m.tick);
    w.put_u32(static_cast<uint32_t>(m.avatars.size()));
    for (const auto& [id, pos] : m.avatars) {
        w.put_u32(id);
        put_pos(w, pos);
    }
    return w.take();
}

AvatarPositionsMsg decode_avatar_positions(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    AvatarPositionsMsg m;
    m.tick = r.get_i64();
    uint32_t n = r.get_u32();
    if (n > 100000) throw WireError("avatar count out of range");
    for (uint32_t i = 0; i < n; ++i) {
        PlayerId id = r.get_u32();
        m.avatars.emplace_back(id, get_pos(r));
    }
    if (!r.done()) throw WireError("avatar positions has trailing bytes");
    return m;
}

std::vector<uint8_t> encode_chat_broadcast(const ChatBroadcastMsg& m) {
    ByteWriter w;
    w.put_u32(m.from);
    w.put_string(m.text);
    return w.take();
}

ChatBroadcastMsg decode_chat_broadcast(const std::vector<uint8_t>& payload) {
    ByteReader r(payload);
    ChatBroadcastMsg m;
    m.from = r.get_u32();
    m.text = r.get_string();
    if (!r.done()) throw WireError("chat broadcast has trailing bytes");
    return m;
}

}  // namespace servo
