#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "servo/wire.hpp"
#include "servo/world.hpp"

namespace servo {

// Framing: uint32 little-endian payload length (including the tag byte),
// then a 1-byte tag, then the payload.
enum class MsgTag : uint8_t {
    Join = 1,
    Action = 2,
    Welcome = 0x10,
    ChunkData = 0x11,
    BlockChange = 0x12,
    AvatarPositions = 0x13,
    ChatBroadcast = 0x14,
};

constexpr size_t kMaxFrameBytes = 4u << 20;

struct PlayerAction {
    enum class Kind : uint8_t {
        Move = 1,
        Break = 2,
        Place = 3,
        Stand = 4,
        Chat = 5,
        SetInventory = 6,
    };

    Kind kind = Kind::Stand;
    Pos target;                // Move destination, Break/Place block
    uint8_t speed = 1;         // Move, blocks per second, 1..8
    BlockType place_type = BlockType::Solid;
    uint16_t stand_ticks = 0;  // Stand duration
    std::string text;          // Chat
    uint16_t item = 0;         // SetInventory
};

struct JoinMsg {
    std::string name;
};

struct WelcomeMsg {
    PlayerId player_id = 0;
    uint8_t tick_rate_hz = 20;
    Pos spawn;
};

struct BlockChangeMsg {
    Pos pos;
    Block block;
    int64_t tick = 0;
};

struct AvatarPositionsMsg {
    int64_t tick = 0;
    std::vector<std::pair<PlayerId, Pos>> avatars;
};

struct ChatBroadcastMsg {
    PlayerId from = 0;
    std::string text;
};

std::vector<uint8_t> encode_frame(MsgTag tag, const std::vector<uint8_t>& payload);

// Incremental frame splitter for a TCP byte stream.
class FrameReader {
public:
    void feed(const uint8_t* data, size_t n);
    // Returns the next complete (tag, payload) frame, if any.
    std::optional<std::pair<MsgTag, std::vector<uint8_t>>> next();

private:
    std::vector<uint8_t> buf_;
    size_t consumed_ = 0;
};

std::vector<uint8_t> encode_action(const PlayerAction& a);
PlayerAction decode_action(const std::vector<uint8_t>& payload);
std::vector<uint8_t> encode_join(const JoinMsg& m);
JoinMsg decode_join(const std::vector<uint8_t>& payload);
std::vector<uint8_t> encode_welcome(const WelcomeMsg& m);
WelcomeMsg decode_welcome(const std::vector<uint8_t>& payload);
std::vector<uint8_t> encode_block_change(const BlockChangeMsg& m);
BlockChangeMsg decode_block_change(const std::vector<uint8_t>& payload);
std::vector<uint8_t> encode_avatar_positions(const AvatarPositionsMsg& m);
AvatarPositionsMsg decode_avatar_positions(const std::vector<uint8_t>& payload);
std::vector<uint8_t> encode_chat_broadcast(const ChatBroadcastMsg& m);
ChatBroadcastMsg decode_chat_broadcast(const std::vector<uint8_t>& payload);

}  // namespace servo
