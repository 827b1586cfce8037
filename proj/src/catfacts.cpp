#include "whisker/catfacts.hpp"

#include <array>

namespace whisker {

namespace {

constexpr std::array<std::string_view, 56> kFacts = {
    "Cats sleep for around thirteen to sixteen hours a day.",
    "A group of cats is called a clowder.",
    "Cats have five toes on their front paws but only four on the back.",
    "A cat's nose print is unique, much like a human fingerprint.",
    "Cats can rotate their ears about 180 degrees.",
    "Each ear is moved by more than thirty muscles.",
    "Cats walk like camels and giraffes, moving both right legs and then both left legs.",
    "Adult cats rarely meow at each other; the meow is mostly for humans.",
    "A cat's purr vibrates at roughly 25 to 150 hertz.",
    "Cats cannot taste sweetness.",
    "Whiskers are roughly as wide as the cat's body.",
    "Cats have a third eyelid called the nictitating membrane.",
    "Kittens are usually born with blue eyes.",
    "The oldest known pet cat was buried with its owner in Cyprus about 9,500 years ago.",
    "A cat can jump up to six times its body length.",
    "Cats spend a large part of their waking hours grooming themselves.",
    "The ridged pattern on a cat's tongue is made of tiny backward-facing hooks called papillae.",
    "Cats have about 244 bones in their bodies.",
    "A cat's collarbone does not connect to other bones, which helps it squeeze through small spaces.",
    "Cats see well in light about one sixth as bright as humans need.",
    "Most cats do not have eyelashes.",
    "The technical term for a hairball is a trichobezoar.",
    "Cats use their whiskers to judge whether they fit through a gap.",
    "A house cat shares most of its genome with tigers.",
    "Cats can run at about 48 kilometres per hour over short distances.",
    "Many cats are lactose intolerant.",
    "A cat's heart beats nearly twice as fast as a human heart.",
    "Cats have scent glands on their cheeks, paws and flanks.",
    "Slow blinking at a cat is a friendly signal.",
    "Cats can make over one hundred distinct vocal sounds.",
    "The first cat in space was a French cat named Felicette, in 1963.",
    "Calico cats are almost always female.",
    "Cats knead with their paws when they are content.",
    "A cat's tail helps it balance on narrow surfaces.",
    "Ragdoll cats tend to go limp when picked up.",
    "The Maine Coon is one of the largest domestic breeds.",
    "Cats sweat through their paw pads.",
    "A cat's brain has a similar structure to a human brain in the regions that handle emotion.",
    "Cats can hear frequencies up to about 64 kilohertz.",
    "Ancient Egyptians shaved their eyebrows to mourn the death of a cat.",
    "Cats have a righting reflex that helps them land on their feet.",
    "Polydactyl cats have extra toes and were once favoured by sailors.",
    "Cats drink by flicking their tongue so fast it pulls up a column of water.",
    "A cat's whiskers fall out and regrow, just like other hair.",
    "Cats are crepuscular: most active at dawn and dusk.",
    "A cat's sense of smell is about fourteen times stronger than a human's.",
    "Cats have a special scent organ in the roof of the mouth called the Jacobson's organ.",
    "The world's richest cat reportedly inherited millions from its owner.",
    "Cats often bring prey home to share with their human family.",
    "Sphynx cats are not truly hairless; they have fine downy fuzz.",
    "A cat's back is extremely flexible thanks to up to 53 loosely fitting vertebrae.",
    "Cats chirp or chatter when watching birds they cannot reach.",
    "Female cats tend to be right-pawed, males left-pawed.",
    "Cats rub against people to mark them with their scent.",
    "A kitten's sense of smell is working at birth; sight and hearing come later.",
    "Cats recognise their owner's voice even if they choose not to come.",
};

}  // namespace

std::span<const std::string_view> cat_facts() { return kFacts; }

}  // namespace whisker
